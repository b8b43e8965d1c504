import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otfs_lab.params import (
    SPEED_OF_LIGHT_COMPAT, MobilityParams, OtfsFrameParams, coherence_time, compactness_check, kmh,
    max_doppler_shift, spectral_efficiency, symbols_per_coherence,
)


class TestFrameParams:
    def test_derived_accessors(self):
        p = OtfsFrameParams(32, 16, delta_f=15e3, fc=4e9, cp_len=4)
        assert p.T * p.delta_f == pytest.approx(1.0, rel=1e-12)
        assert p.frame_duration == pytest.approx(16 * p.T, rel=1e-12)
        assert p.bandwidth == pytest.approx(32 * 15e3, rel=1e-12)
        assert p.sample_rate == p.bandwidth
        assert p.samples_per_frame == 16 * 36

    def test_explicit_T_must_be_critical(self):
        OtfsFrameParams(8, 4, delta_f=15e3, T=1 / 15e3)
        with pytest.raises(ValueError):
            OtfsFrameParams(8, 4, delta_f=15e3, T=2 / 15e3)

    @pytest.mark.parametrize("kw", [dict(M=1, N=4), dict(M=8, N=0), dict(M=8, N=4, cp_len=8),
                                    dict(M=8, N=4, cp_len=-1), dict(M=8, N=4, delta_f=0.0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            OtfsFrameParams(**kw)


class TestDopplerArithmetic:
    def test_rounded_c_doppler(self):
        assert max_doppler_shift(3.5e9, kmh(300), SPEED_OF_LIGHT_COMPAT) == pytest.approx(972.22, abs=0.01)

    def test_zero_speed(self):
        assert max_doppler_shift(3.5e9, 0.0) == 0.0

    def test_mmwave_value(self):
        # 28 GHz * (120/3.6 m/s) / 3e8, evaluated at 30 digits
        assert max_doppler_shift(28e9, kmh(120), 3e8) == pytest.approx(3111.1111111111111, rel=1e-12)

    @pytest.mark.parametrize("bad", [(-1.0, 10.0, 3e8), (1e9, -1.0, 3e8), (1e9, 1.0, 0.0),
                                     (math.nan, 1.0, 3e8), (math.inf, 1.0, 3e8)])
    def test_invalid_inputs(self, bad):
        with pytest.raises(ValueError):
            max_doppler_shift(*bad)

    @given(fc=st.floats(1e6, 1e11), v=st.floats(0, 1e3), scale=st.sampled_from([2.0, 3.0, 0.5]))
    def test_linear_in_speed_and_carrier(self, fc, v, scale):
        base = max_doppler_shift(fc, v)
        assert max_doppler_shift(fc * scale, v) == pytest.approx(scale * base, rel=1e-12, abs=1e-300)
        assert max_doppler_shift(fc, v * scale) == pytest.approx(scale * base, rel=1e-12, abs=1e-300)

    def test_mobility_record(self):
        m = MobilityParams(v=kmh(300), fc=3.5e9, c_rounded=True)
        assert m.wavelength == pytest.approx(3e8 / 3.5e9)
        assert m.max_doppler == pytest.approx(972.22, abs=0.01)
        assert MobilityParams(v=1.0, fc=1e9).c == 299_792_458.0
        with pytest.raises(ValueError):
            MobilityParams(v=-1.0, fc=1e9)


class TestCoherence:
    def test_published_value(self):
        assert coherence_time(972.22) * 1e6 == pytest.approx(257.14, abs=0.01)

    def test_unit_case(self):
        assert coherence_time(0.25) == 1.0

    def test_hand_value(self):
        assert coherence_time(3111.11) == pytest.approx(8.03571715561327e-05, rel=1e-12)

    @pytest.mark.parametrize("nu", [0.0, -3.0])
    def test_rejects_non_positive(self, nu):
        with pytest.raises(ValueError):
            coherence_time(nu)

    def test_symbol_fit_published(self):
        fit = symbols_per_coherence(257.14e-6, 15e3, 0.20)
        assert fit.symbol_duration * 1e6 == pytest.approx(80.0, abs=0.01)
        assert fit.count == 3

    def test_symbol_fit_exact_boundary(self):
        d = (1 / 15e3) * 1.2
        assert symbols_per_coherence(d, 15e3, 0.2).count == 1

    def test_symbol_fit_hand_value(self):
        # 257.14 us / ((1/30 kHz) * 1.0667) = 7.2318...
        assert symbols_per_coherence(257.14e-6, 30e3, 0.0667).count == 7

    @pytest.mark.parametrize("args", [(0.0, 15e3, 0.1), (1e-3, 0.0, 0.1), (1e-3, 15e3, 1.0),
                                      (1e-3, 15e3, -0.1)])
    def test_symbol_fit_rejects(self, args):
        with pytest.raises(ValueError):
            symbols_per_coherence(*args)

    def test_end_to_end_chain(self):
        nu = max_doppler_shift(3.5e9, kmh(300), SPEED_OF_LIGHT_COMPAT)
        coh = coherence_time(nu)
        fit = symbols_per_coherence(coh, 15e3, 0.2)
        assert (round(nu, 2), round(coh * 1e6, 2), round(fit.symbol_duration * 1e6, 2), fit.count) == \
            (972.22, 257.14, 80.0, 3)


class TestSpectralEfficiency:
    def test_qpsk_no_overhead(self):
        assert spectral_efficiency(0.0, 1.0, 4) == 2.0

    def test_hand_value(self):
        assert spectral_efficiency(0.5, 0.5, 16) == 1.0

    @pytest.mark.parametrize("args", [(1.0, 1.0, 4), (-0.1, 1.0, 4), (0.1, 0.0, 4), (0.1, 1.1, 4),
                                      (0.1, 1.0, 1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            spectral_efficiency(*args)

    def test_monotone_on_sampled_triples(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            eta = rng.uniform(0, 0.9)
            rc = rng.uniform(0.05, 0.95)
            m = int(2 ** rng.integers(1, 8))
            se = spectral_efficiency(eta, rc, m)
            assert spectral_efficiency(eta + 0.05, rc, m) < se
            assert spectral_efficiency(eta, rc + 0.05, m) > se
            assert spectral_efficiency(eta, rc, 2 * m) > se


class TestCompactness:
    def test_estimation_setup(self):
        M = N = 32
        df = 15e3
        res = compactness_check(4 / (M * df), 2 / (N * (1 / df)))
        assert res.product == pytest.approx(1 / 32, rel=1e-12)
        assert res.satisfied

    def test_zero_delay(self):
        res = compactness_check(0.0, 500.0)
        assert res.product == 0.0 and res.satisfied

    def test_boundary_inclusive(self):
        res = compactness_check(0.5, 0.5)
        assert res.product == 1.0 and res.satisfied
        assert not compactness_check(0.5, 0.51).satisfied

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            compactness_check(-1.0, 1.0)
