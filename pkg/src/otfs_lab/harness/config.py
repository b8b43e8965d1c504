"""Experiment descriptors and the flat ``key = value`` config format.

A config file is one assignment per line; ``#`` starts a comment. Keys are
the fields of :class:`SimConfig`. Two expansion rules turn one file into
several curves:

* ``curve.<label>.<key> = value`` sets ``key`` for curve ``label`` only;
  curves inherit every top-level key.
* a comma-separated value for any key other than ``snr_db`` expands the
  curve into the cartesian product of the listed values.

``snr_db`` accepts a comma list, a ``start:stop:step`` range (inclusive of
``stop``), or a mix of both, and ``inf`` for the noiseless sentinel.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..channel import ChannelConfig, DopplerLaw
from ..detection import VARIANTS, Constellation, DetectorConfig
from ..estimation import PilotScheme, default_scheme
from ..params import OtfsFrameParams
from ..transforms import WindowSpec

EXPERIMENTS = ("ber", "ce")
ESTIMATORS = ("dd", "tf", "ddce")
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """One curve of an experiment. Field names double as config-file keys."""

    name: str = "run"
    label: str = ""
    experiment: str = "ber"
    # frame
    M: int = 16
    N: int = 8
    delta_f: float = 15e3
    fc: float = 4e9
    cp_len: int = -1  # -1: sufficient CP (= l_max)
    # channel
    P: int = 4
    l_max: int = 3
    kappa_max: float = 3.0
    fractional_doppler: bool = False
    doppler_law: str = "jakes"
    power_profile: str = "uniform"
    decay_rate: float = 0.0
    # transceiver
    waveform: str = "otfs"
    modulation: int = 4
    window: str = "rect"
    window_attenuation_db: float = 60.0
    window_site: str = "tx"
    coded: bool = False
    interleaver_seed: int = 1
    # receiver
    detector: str = "mpa"
    mpa_iters: int = 30
    cdid_iters: int = 10
    damping: float = 0.6
    tol: float = 1e-6
    csi: str = "genie"
    # estimation
    estimator: str = "dd"
    guard: bool = True
    pilot_boost_db: float = 0.0
    threshold_factor: float = 3.0
    noise_estimate: str = "estimated"
    tf_pilot_step: str = "auto"
    ddce_iters: int = 2
    reliability_threshold: float = 0.99
    ddce_soft: bool = False
    # sweep
    snr_db: tuple[float, ...] = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
    min_frame_errors: int = 200
    max_frames: int = 200_000
    seed: int = 1

    def __post_init__(self):
        checks = [
            (self.experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}"),
            (self.waveform in ("otfs", "ofdm"), "waveform must be otfs or ofdm"),
            (self.csi in ("genie", "estimated"), "csi must be genie or estimated"),
            (self.estimator in ESTIMATORS, f"estimator must be one of {ESTIMATORS}"),
            (self.noise_estimate in ("estimated", "known"), "noise_estimate must be estimated or known"),
            (self.detector in VARIANTS + ("none",), f"detector must be one of {VARIANTS + ('none',)}"),
            (len(self.snr_db) > 0, "snr_db sweep is empty"),
            (self.min_frame_errors >= 1 and self.max_frames >= 1, "stop rule must be positive"),
            (0 <= self.seed <= _SEED_MASK, "seed must fit in 64 bits"),
            (self.ddce_iters >= 1, "ddce_iters must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        if self.experiment == "ber":
            if self.detector == "none":
                raise ValueError("ber experiments need a detector")
            if self.waveform == "ofdm" and (self.detector != "ofdm_onetap" or self.csi != "genie"):
                raise ValueError("the ofdm waveform runs the one-tap detector with genie CSI")
            if self.waveform == "otfs" and self.detector == "ofdm_onetap":
                raise ValueError("ofdm_onetap needs waveform = ofdm")
            if self.detector == "cdid" and (self.csi != "genie" or not self.window_spec.is_rectangular):
                raise ValueError("cdid runs with genie CSI and a rectangular window")
        elif self.estimator == "ddce" and self.detector in ("none", "ofdm_onetap", "cdid"):
            raise ValueError("ddce needs a DD-domain detector (lmmse, mpa or map)")
        # sub-configs validate themselves
        self.channel_config.validate(self.frame_params)
        self.window_spec
        self.detector_config
        Constellation(self.modulation)
        if self.needs_scheme:
            self.pilot_scheme
        if self.tf_pilot_step != "auto":
            _parse_step(self.tf_pilot_step)

    @property
    def frame_params(self) -> OtfsFrameParams:
        cp = self.l_max if self.cp_len < 0 else self.cp_len
        return OtfsFrameParams(self.M, self.N, delta_f=self.delta_f, fc=self.fc, cp_len=cp)

    @property
    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(self.P, self.l_max, self.kappa_max, self.fractional_doppler,
                             DopplerLaw(self.doppler_law), self.power_profile, self.decay_rate)

    @property
    def window_spec(self) -> WindowSpec:
        return WindowSpec.parse(self.window, self.window_attenuation_db, self.window_site)

    @property
    def detector_config(self) -> DetectorConfig:
        iters = self.cdid_iters if self.detector == "cdid" else self.mpa_iters
        variant = "lmmse" if self.detector == "none" else self.detector
        return DetectorConfig(variant, iters, self.damping, self.tol)

    @property
    def needs_scheme(self) -> bool:
        if self.experiment == "ce":
            return self.estimator in ("dd", "ddce")
        return self.csi == "estimated"

    @property
    def pilot_scheme(self) -> PilotScheme | None:
        if not self.needs_scheme:
            return None
        guard = self.guard and not (self.experiment == "ce" and self.estimator == "ddce")
        return default_scheme(self.frame_params, self.l_max, self.kappa_max, self.fractional_doppler,
                              self.pilot_boost_db, guard=guard, window=self.window_spec)

    @property
    def curve_label(self) -> str:
        return self.label or self.name

    def to_items(self) -> list[tuple[str, str]]:
        """Resolved key/value pairs in schema order, formatted for config files."""
        return [(f.name, format_value(getattr(self, f.name))) for f in dataclasses.fields(self)]


def _parse_step(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"tf_pilot_step must look like 4x2, got {text!r}")
    sm, sn = (int(p) for p in parts)
    if sm < 1 or sn < 1:
        raise ValueError("tf_pilot_step entries must be >= 1")
    return sm, sn


def tf_pilot_steps(cfg: SimConfig) -> tuple[int, int]:
    """TF pilot lattice spacing; ``auto`` matches the DD scheme's overhead."""
    if cfg.tf_pilot_step != "auto":
        return _parse_step(cfg.tf_pilot_step)
    M, N = cfg.M, cfg.N
    target = default_scheme(cfg.frame_params, cfg.l_max, cfg.kappa_max, cfg.fractional_doppler,
                            cfg.pilot_boost_db, guard=cfg.guard, window=cfg.window_spec).eta
    best = None
    for sm in range(1, M + 1):
        for sn in range(1, N + 1):
            eta = math.ceil(M / sm) * math.ceil(N / sn) / (M * N)
            key = (abs(eta - target), abs(sm - sn), sm)
            if best is None or key < best[0]:
                best = (key, (sm, sn))
    return best[1]


# ---------------------------------------------------------------- value codecs

def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(t)


def parse_snr_list(text: str) -> tuple[float, ...]:
    out: list[float] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if ":" in part:
            start, stop, step = (_parse_float(x) for x in part.split(":"))
            if step <= 0 or not (math.isfinite(start) and math.isfinite(stop)):
                raise ValueError(f"bad SNR range {part!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(round(start + i * step, 12) for i in range(count))
        else:
            out.append(_parse_float(part))
    return tuple(out)


_TYPES = typing.get_type_hints(SimConfig)
KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))


def parse_value(key: str, text: str):
    if key not in _TYPES:
        raise KeyError(f"unknown config key {key!r}")
    typ = _TYPES[key]
    text = text.strip()
    if key == "snr_db":
        return parse_snr_list(text)
    if typ is bool:
        return _parse_bool(text)
    if typ is int:
        return int(text, 0) if text.lower().startswith("0x") else int(text)
    if typ is float:
        return _parse_float(text)
    return text


# ---------------------------------------------------------------- files

@dataclass
class ConfigFile:
    """Raw assignments: top-level keys plus per-curve overrides, all still text."""

    base: dict[str, str] = field(default_factory=dict)
    curves: dict[str, dict[str, str]] = field(default_factory=dict)
    source: str = "<string>"

    def set(self, key: str, value: str) -> None:
        key = key.strip()
        if key.startswith("curve."):
            _, label, sub = (key.split(".", 2) + ["", ""])[:3]
            if not label or not sub:
                raise ValueError(f"{self.source}: malformed curve key {key!r}")
            _check_key(sub, self.source)
            self.curves.setdefault(label, {})[sub] = value.strip()
        else:
            _check_key(key, self.source)
            self.base[key] = value.strip()


def _check_key(key: str, source: str) -> None:
    if key not in KEYS:
        raise KeyError(f"{source}: unknown config key {key!r}")


def parse_config_text(text: str, source: str = "<string>") -> ConfigFile:
    cfg = ConfigFile(source=source)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        try:
            cfg.set(key, value)
        except KeyError as exc:
            raise KeyError(f"{source}:{lineno}: {exc.args[0]}") from None
    return cfg


def preset_names() -> list[str]:
    return sorted(p.name for p in resources.files("otfs_lab.presets").iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    fname = name if name.endswith(".cfg") else name + ".cfg"
    return resources.files("otfs_lab.presets").joinpath(fname).read_text()


def load_config(path_or_preset: str | Path, overrides: list[str] | tuple[str, ...] = ()) -> ConfigFile:
    """Read a config file, falling back to a shipped preset of that name."""
    p = Path(path_or_preset)
    if p.is_file():
        cfg = parse_config_text(p.read_text(), str(p))
    else:
        name = p.name if p.name.endswith(".cfg") else p.name + ".cfg"
        if name not in preset_names():
            raise FileNotFoundError(f"no config file or preset named {str(path_or_preset)!r}")
        cfg = parse_config_text(preset_text(name), name)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k, v)
    return cfg


def _split_list(key: str, text: str) -> list[str]:
    if key == "snr_db":
        return [text]
    return [p.strip() for p in text.split(",")]


def expand(cfg: ConfigFile) -> list[SimConfig]:
    """Resolve a config file into one :class:`SimConfig` per curve."""
    groups = cfg.curves.items() if cfg.curves else [("", {})]
    out: list[SimConfig] = []
    for label, extra in groups:
        merged = dict(cfg.base)
        merged.update(extra)
        keys = list(merged)
        options = [_split_list(k, merged[k]) for k in keys]
        varying = [k for k, opts in zip(keys, options) if len(opts) > 1 and k != "label"]
        for combo in itertools.product(*options):
            values = {k: parse_value(k, v) for k, v in zip(keys, combo)}
            parts = [label] if label else []
            parts += [f"{k}={format_value(values[k])}" for k in varying]
            if "label" not in values or varying:
                values["label"] = "_".join(parts) if parts else values.get("name", "run")
            try:
                out.append(SimConfig(**values))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{cfg.source}: curve {values['label']!r}: {exc}") from None
    labels = [c.label for c in out]
    if len(set(labels)) != len(labels):
        raise ValueError(f"{cfg.source}: duplicate curve labels {labels}")
    return out
