import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from .corr_field import FieldSet
    from .lsf import ScenarioConfig


def _as_vector(values, label: str, size: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if size is not None and arr.size != size:
        raise ValueError(f"{label} must have {size} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LinkGeometry:
    tx_pos: np.ndarray
    rx_pos: np.ndarray

    def __post_init__(self):
        tx = _as_vector(self.tx_pos, "tx_pos", 3)
        rx = _as_vector(self.rx_pos, "rx_pos", 3)
        if np.array_equal(tx, rx):
            raise ValueError("tx_pos and rx_pos coincide; a link needs positive separation")
        object.__setattr__(self, "tx_pos", tx)
        object.__setattr__(self, "rx_pos", rx)

    @property
    def delta(self) -> np.ndarray:
        return self.rx_pos - self.tx_pos

    @property
    def distance_3d(self) -> float:
        return float(np.linalg.norm(self.delta))

    @property
    def distance_2d(self) -> float:
        dx, dy, _ = self.delta
        return float(np.hypot(dx, dy))

    def swapped(self) -> "LinkGeometry":
        return LinkGeometry(tx_pos=self.rx_pos, rx_pos=self.tx_pos)


@dataclass(frozen=True, eq=False)
class LsfSample:
    """Large-scale parameters of one link, one entry per carrier frequency.

    `ds` is in seconds, the four angular spreads are in radians and `kf` is a
    linear power ratio.
    """

    frequencies_ghz: np.ndarray
    ds: np.ndarray
    asd: np.ndarray
    asa: np.ndarray
    esd: np.ndarray
    esa: np.ndarray
    kf: np.ndarray

    def __post_init__(self):
        freqs = _as_vector(self.frequencies_ghz, "frequencies_ghz")
        if freqs.size < 1:
            raise ValueError("LsfSample needs at least one frequency")
        object.__setattr__(self, "frequencies_ghz", freqs)
        for name in ("ds", "asd", "asa", "esd", "esa", "kf"):
            arr = _as_vector(getattr(self, name), name, freqs.size)
            if np.any(arr <= 0):
                raise ValueError(f"{name} must be strictly positive")
            object.__setattr__(self, name, arr)

    @property
    def n_freqs(self) -> int:
        return self.frequencies_ghz.size

    @property
    def kf_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.kf)

    def swapped(self) -> "LsfSample":
        """Same link seen from the other end: departure and arrival exchange roles."""
        return LsfSample(
            frequencies_ghz=self.frequencies_ghz,
            ds=self.ds,
            asd=self.asa,
            asa=self.asd,
            esd=self.esa,
            esa=self.esd,
            kf=self.kf,
        )


@dataclass(frozen=True, eq=False)
class InitialPaths:
    tau_tilde: np.ndarray
    phi_d: np.ndarray
    phi_a: np.ndarray
    theta_d: np.ndarray
    theta_a: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.tau_tilde).size
        if n < 2:
            raise ValueError("at least two paths (LOS + one NLOS) are required")
        for name in ("tau_tilde", "phi_d", "phi_a", "theta_d", "theta_a"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name, n))
        if self.tau_tilde[0] != 0 or np.any(self.tau_tilde < 0):
            raise ValueError("initial delays must start at 0 (LOS) and be non-negative")

    @property
    def path_count(self) -> int:
        return self.tau_tilde.size


@dataclass(frozen=True, eq=False)
class ScalingCoeffs:
    g_ds: np.ndarray
    g_asd: np.ndarray
    g_asa: np.ndarray
    g_esd: np.ndarray
    g_esa: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.g_ds).size
        for name in ("g_ds", "g_asd", "g_asa", "g_esd", "g_esa"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name, n))


@dataclass(frozen=True, eq=False)
class PathTable:
    """Generated paths: frequency-independent delays/angles, per-frequency powers.

    `powers` has shape (L, F). Delays are in seconds, angles in radians.
    """

    frequencies_ghz: np.ndarray
    tau: np.ndarray
    powers: np.ndarray
    aod_az: np.ndarray
    aoa_az: np.ndarray
    aod_el: np.ndarray
    aoa_el: np.ndarray

    def __post_init__(self):
        freqs = _as_vector(self.frequencies_ghz, "frequencies_ghz")
        tau = _as_vector(self.tau, "tau")
        powers = np.array(self.powers, dtype=float).reshape(tau.size, freqs.size)
        powers.flags.writeable = False
        object.__setattr__(self, "frequencies_ghz", freqs)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "powers", powers)
        for name in ("aod_az", "aoa_az", "aod_el", "aoa_el"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name, tau.size))

    @property
    def path_count(self) -> int:
        return self.tau.size

    @property
    def n_freqs(self) -> int:
        return self.frequencies_ghz.size

    def to_dict(self) -> dict[str, Any]:
        return {
            "frequencies_ghz": self.frequencies_ghz.tolist(),
            "delays_s": self.tau.tolist(),
            "powers": self.powers.T.tolist(),
            "aod_az_rad": self.aod_az.tolist(),
            "aoa_az_rad": self.aoa_az.tolist(),
            "aod_el_rad": self.aod_el.tolist(),
            "aoa_el_rad": self.aoa_el.tolist(),
        }


@dataclass
class TraceEvent:
    op: str
    payload: dict[str, Any]
    t: float = field(default_factory=time.time)


@dataclass
class PathState:
    """Mutable working state handed from one pipeline stage to the next."""

    fields: "FieldSet"
    geom: LinkGeometry
    lsf: LsfSample
    cfg: "ScenarioConfig"
    tau_tilde: np.ndarray | None = None
    init: InitialPaths | None = None
    coeffs: ScalingCoeffs | None = None
    p_tilde: np.ndarray | None = None
    powers: np.ndarray | None = None
    tau: np.ndarray | None = None
    angles: dict[str, np.ndarray] = field(default_factory=dict)
    trace: list[TraceEvent] = field(default_factory=list)

    def log(self, op, **payload):
        self.trace.append(TraceEvent(op, payload))

    def to_table(self) -> PathTable:
        missing = [
            name
            for name in ("aod_az", "aoa_az", "aod_el", "aoa_el")
            if name not in self.angles
        ]
        if self.tau is None or self.powers is None or missing:
            raise ValueError(f"pipeline incomplete; missing {missing or 'delays/powers'}")
        return PathTable(
            frequencies_ghz=self.lsf.frequencies_ghz,
            tau=self.tau,
            powers=self.powers,
            aod_az=self.angles["aod_az"],
            aoa_az=self.angles["aoa_az"],
            aod_el=self.angles["aod_el"],
            aoa_el=self.angles["aoa_el"],
        )
