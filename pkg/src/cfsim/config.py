"""Simulation configuration.

A :class:`SimConfig` holds every scenario parameter plus the Monte-Carlo
controls. The defaults reproduce the reference urban-microcell scenario
(2 km x 2 km torus, 25 RUs with 16 antennas, 30 pilots, Q = 10).

Configuration files are JSON objects whose keys are the field names of
:class:`SimConfig`; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration value is missing or out of range."""


class _ParseEnum(str, enum.Enum):
    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for member in cls:
            names = {member.value.lower(), member.name.lower()}
            names |= {a.lower() for a in _ALIASES.get(member.value, ())}
            if key in names:
                return member
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"unknown {cls.__name__} {value!r} (choose from {choices})")


class Scheme(_ParseEnum):
    NON_OVERLOADED = "NonOverloaded"
    SIA_OPA = "SiaOpa"
    ROPA_RANDOM = "RopaRandom"
    ROPA_WGF = "RopaWgf"


class Estimator(_ParseEnum):
    PM = "PM"
    SP = "SP"
    IDEAL = "Ideal"


class WgfMetric(_ParseEnum):
    AUTO = "auto"
    PLAIN = "plain"
    FULL_SP = "full_sp"
    PARTIAL_SP = "partial_sp"


_ALIASES = {
    "NonOverloaded": ("nonoverloaded", "non", "nopa"),
    "SiaOpa": ("siaopa", "sia"),
    "RopaRandom": ("roparandom", "random", "rpa"),
    "RopaWgf": ("ropawgf", "wgf"),
    "full_sp": ("fullsp",),
    "partial_sp": ("partialsp",),
}


ADMISSION_MODES = ("two_phase", "sequential")


@dataclass(frozen=True)
class SimConfig:
    area_side: float = 2000.0
    num_ues: int = 600
    num_rus: int = 25
    antennas_per_ru: int = 16
    pilot_dim: int = 30
    max_cluster_size: int = 10
    threshold: float = 1.0
    carrier_freq: float = 3.7
    bandwidth: float = 10e6
    tx_power: float = 20.0
    noise_psd: float = -174.0
    rb_dim: int = 200
    angular_spread: float = math.pi / 8
    num_layouts: int = 5
    num_fadings: int = 10
    seed: int = 0
    scheme: Scheme = Scheme.SIA_OPA
    estimator: Estimator = Estimator.SP
    wgf_metric: WgfMetric = WgfMetric.AUTO
    ru_height: float = 10.0
    ue_height: float = 1.5
    min_distance: float = 10.0
    shadowing: bool = True
    los_model: bool = True
    admission: str = "two_phase"

    def __post_init__(self):
        for name in ("scheme", "estimator", "wgf_metric"):
            enum_type = {"scheme": Scheme, "estimator": Estimator, "wgf_metric": WgfMetric}[name]
            object.__setattr__(self, name, enum_type.parse(getattr(self, name)))
        for name in ("num_ues", "num_rus", "antennas_per_ru", "pilot_dim", "max_cluster_size",
                     "rb_dim", "num_layouts", "num_fadings", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        self.validate()

    def validate(self):
        def need(cond, field, msg):
            if not cond:
                raise ConfigError(f"{field}: {msg} (got {getattr(self, field)!r})")

        need(self.area_side > 0, "area_side", "must be > 0")
        need(self.num_ues >= 1, "num_ues", "must be >= 1")
        need(self.num_rus >= 1, "num_rus", "must be >= 1")
        need(self.antennas_per_ru >= 1, "antennas_per_ru", "must be >= 1")
        need(1 <= self.pilot_dim < self.rb_dim, "pilot_dim", "must satisfy 1 <= pilot_dim < rb_dim")
        need(1 <= self.max_cluster_size <= self.num_rus, "max_cluster_size",
             "must satisfy 1 <= Q <= num_rus")
        need(self.threshold > 0, "threshold", "must be > 0")
        need(0 < self.angular_spread < math.pi, "angular_spread", "must lie in (0, pi)")
        need(self.carrier_freq > 0, "carrier_freq", "must be > 0")
        need(self.bandwidth > 0, "bandwidth", "must be > 0")
        need(self.num_layouts >= 1, "num_layouts", "must be >= 1")
        need(self.num_fadings >= 1, "num_fadings", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.admission in ADMISSION_MODES, "admission",
             f"must be one of {', '.join(ADMISSION_MODES)}")
        need(self.min_distance > 0, "min_distance", "must be > 0")
        need(self.ru_height > self.ue_height, "ru_height", "must exceed ue_height")
        snr = self.snr
        if not (math.isfinite(snr) and snr > 0):
            raise ConfigError(f"tx_power/noise_psd/bandwidth: derived SNR {snr!r} is not positive and finite")

    @property
    def snr(self) -> float:
        return snr_parameter(self)

    @property
    def threshold_lsfc(self) -> float:
        """Smallest LSFC an RU may serve: eta / (M * SNR)."""
        return self.threshold / (self.antennas_per_ru * self.snr)

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, enum.Enum):
                out[key] = value.value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**dict(data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def snr_parameter(config) -> float:
    """Es/N0 as a linear ratio from transmit power, noise PSD and bandwidth."""
    noise_dbm = config.noise_psd + 10.0 * math.log10(config.bandwidth)
    return 10.0 ** ((config.tx_power - noise_dbm) / 10.0)


def load_config(path, **overrides) -> SimConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig.from_dict(data)
