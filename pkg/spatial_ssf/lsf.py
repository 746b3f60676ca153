"""Scenario configuration and large-scale parameter sampling.

Scenario files are TOML. Shared keys at the top level apply to every
condition; each `[LOS]` / `[NLOS]` section holds the per-condition values:

    scenario = "UMi"
    frequencies_ghz = [1.0, 6.0, 60.0]

    [LOS]
    path_count = 12
    decorrelation_m = { delay = 12.0, angle = 12.0 }
    ds = { mu = -7.14, mu_freq = -0.24, sigma = 0.38 }
    ...
"""

import logging
import tomllib
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .core import LinkGeometry, LsfSample
from .corr_field import DEFAULT_DECORRELATION_M, DEFAULT_SINUSOIDS, AcfSpec

logger = logging.getLogger(__name__)

CONDITIONS = ("LOS", "NLOS")
PARAMETERS = ("ds", "asd", "asa", "esd", "esa", "kf")
SHARED_KEYS = ("scenario", "frequencies_ghz", "min_frequency_ghz", "n_sinusoids")


class ConfigError(ValueError):
    """Scenario file could not be read, parsed or validated."""


class ParamDistribution(BaseModel):
    """Normal distribution of a log10 (spreads) or dB (KF) parameter.

    mean = mu + mu_freq*log10(1 + f_GHz) + mu_dist*d_2d[km] + mu_height*h,
    optionally floored at `mu_floor`; std = sigma + sigma_freq*log10(1 + f_GHz).
    `h` is |h_MT - h_BS| ("abs") or max(h_MT - h_BS, 0) ("excess").
    `cap` bounds the linear value (degrees for angular spreads).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    mu: float
    mu_freq: float = 0.0
    mu_dist: float = 0.0
    mu_height: float = 0.0
    height_term: Literal["abs", "excess"] = "abs"
    mu_floor: float | None = None
    sigma: float = Field(0.0, ge=0.0)
    sigma_freq: float = 0.0
    cap: float | None = Field(None, gt=0.0)

    def mean(self, f_ghz, d2d_km: float, h_mt: float, h_bs: float):
        dh = abs(h_mt - h_bs) if self.height_term == "abs" else max(h_mt - h_bs, 0.0)
        lf = np.log10(1.0 + np.asarray(f_ghz, dtype=float))
        mu = self.mu + self.mu_freq * lf + self.mu_dist * d2d_km + self.mu_height * dh
        if self.mu_floor is not None:
            mu = np.maximum(mu, self.mu_floor)
        return mu

    def std(self, f_ghz):
        lf = np.log10(1.0 + np.asarray(f_ghz, dtype=float))
        return np.maximum(self.sigma + self.sigma_freq * lf, 0.0)


class DecorrelationDistances(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    delay: float = Field(DEFAULT_DECORRELATION_M, gt=0.0)
    angle: float = Field(DEFAULT_DECORRELATION_M, gt=0.0)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: str
    condition: Literal["LOS", "NLOS"]
    frequencies_ghz: tuple[float, ...]
    min_frequency_ghz: float = Field(0.0, ge=0.0)
    n_sinusoids: int = Field(DEFAULT_SINUSOIDS, ge=1)
    path_count: int
    decorrelation_m: DecorrelationDistances = DecorrelationDistances()
    azimuth_scale_cap: float = Field(3.0, gt=0.0)
    elevation_scale_cap: float = Field(1.5, gt=0.0)
    ds: ParamDistribution
    asd: ParamDistribution
    asa: ParamDistribution
    esd: ParamDistribution
    esa: ParamDistribution
    kf: ParamDistribution

    @field_validator("path_count")
    @classmethod
    def _enough_paths(cls, v: int) -> int:
        if v < 2:
            raise ValueError("path_count must be ≥ 2")
        return v

    @field_validator("frequencies_ghz")
    @classmethod
    def _valid_frequencies(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v:
            raise ValueError("at least one frequency is required")
        if any(not np.isfinite(f) or f <= 0 for f in v):
            raise ValueError("frequencies must be positive")
        if len(set(v)) != len(v):
            raise ValueError("frequencies must be distinct")
        return v

    @property
    def delay_acf(self) -> AcfSpec:
        return AcfSpec(self.decorrelation_m.delay)

    @property
    def angle_acf(self) -> AcfSpec:
        return AcfSpec(self.decorrelation_m.angle)

    def with_frequencies(self, frequencies_ghz) -> "ScenarioConfig":
        data = self.model_dump()
        data["frequencies_ghz"] = tuple(float(f) for f in frequencies_ghz)
        return _validate(data, self.condition)


def _format_errors(err: ValidationError, prefix: str) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in (prefix, *e["loc"]))
        msg = e["msg"].removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def _validate(data: dict, condition: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e, condition)) from e


def _read_toml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not text.strip():
        raise ConfigError(f"{path}: empty config file")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e


def load_scenario(path) -> dict[str, ScenarioConfig]:
    """Load every condition section of a scenario file."""
    path = Path(path)
    data = _read_toml(path)
    unknown = sorted(set(data) - set(SHARED_KEYS) - set(CONDITIONS))
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {unknown}")
    sections = [c for c in CONDITIONS if c in data]
    if not sections:
        raise ConfigError(f"{path}: no [LOS] or [NLOS] section")
    shared = {k: data[k] for k in SHARED_KEYS if k in data}
    out = {}
    for condition in sections:
        section = data[condition]
        if not isinstance(section, dict):
            raise ConfigError(f"{condition}: expected a table")
        if "condition" in section:
            raise ConfigError(f"{condition}.condition: set by the section name")
        out[condition] = _validate({**shared, **section, "condition": condition}, condition)
    logger.debug("loaded %s: %s", path, ", ".join(out))
    return out


def load_config(path, condition: str = "LOS") -> ScenarioConfig:
    scenario = load_scenario(path)
    if condition not in scenario:
        raise ConfigError(f"{path}: no [{condition}] section")
    return scenario[condition]


def default_config_path() -> Path:
    """The shipped UMi scenario file."""
    return Path(str(resources.files("spatial_ssf") / "configs" / "umi.toml"))


def bs_is_rx(geom: LinkGeometry) -> bool:
    """The BS side is the endpoint with the larger (z, x, y) key."""
    tx, rx = geom.tx_pos, geom.rx_pos
    return (rx[2], rx[0], rx[1]) > (tx[2], tx[0], tx[1])


def sample_lsf(cfg: ScenarioConfig, geom: LinkGeometry, rng_seed) -> LsfSample:
    """Draw DS, the four AS and KF for one link at every configured frequency.

    One standard-normal value per parameter is shared by all frequencies. The
    configured ASD/ESD belong to the BS side; when the RX is the BS the
    departure and arrival spreads are exchanged.
    """
    rng = np.random.default_rng(rng_seed)
    z = dict(zip(PARAMETERS, rng.standard_normal(len(PARAMETERS))))

    rx_bs = bs_is_rx(geom)
    h_bs, h_mt = (geom.rx_pos[2], geom.tx_pos[2]) if rx_bs else (geom.tx_pos[2], geom.rx_pos[2])
    d2d_km = geom.distance_2d / 1000.0
    freqs = np.asarray(cfg.frequencies_ghz, dtype=float)
    f_eff = np.maximum(freqs, cfg.min_frequency_ghz)

    def draw(name: str) -> np.ndarray:
        dist: ParamDistribution = getattr(cfg, name)
        x = dist.mean(f_eff, d2d_km, h_mt, h_bs) + dist.std(f_eff) * z[name]
        return np.broadcast_to(x, freqs.shape)

    def linear(name: str) -> np.ndarray:
        value = 10.0 ** draw(name)
        cap = getattr(cfg, name).cap
        return np.minimum(value, cap) if cap is not None else value

    ds = linear("ds")
    asd, asa, esd, esa = (np.deg2rad(linear(n)) for n in ("asd", "asa", "esd", "esa"))
    kf = 10.0 ** (draw("kf") / 10.0)
    if rx_bs:
        asd, asa, esd, esa = asa, asd, esa, esd
    return LsfSample(frequencies_ghz=freqs, ds=ds, asd=asd, asa=asa, esd=esd, esa=esa, kf=kf)
