"""Spread estimators, empirical CDFs and the achievable-AS sweep."""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import LinkGeometry, LsfSample, PathTable
from .corr_field import build_field_set
from .utils import SWEEP, derive_seed, wrap_to_pi

if TYPE_CHECKING:
    from .lsf import ScenarioConfig

logger = logging.getLogger(__name__)

SWEEP_TX = (0.0, 0.0, 10.0)
SWEEP_RX = (100.0, 0.0, 10.0)


def _weights(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if not total > 0:
        raise ValueError("total path power must be positive")
    return p / total


def _weighted_rms(x: np.ndarray, w: np.ndarray) -> float:
    mean = (w * x).sum()
    dev = x - mean
    return float(np.sqrt((w * dev * dev).sum()))


def delay_spread(tau, p) -> float:
    """Power-weighted rms delay spread, in the unit of `tau`."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != np.shape(p) or tau.ndim != 1:
        raise ValueError("tau and p must be 1-D arrays of equal length")
    return _weighted_rms(tau, _weights(p))


def angular_spread(phi, p) -> float:
    """Power-weighted rms spread around the circular mean direction, radians."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != np.shape(p) or phi.ndim != 1:
        raise ValueError("phi and p must be 1-D arrays of equal length")
    w = _weights(p)
    delta = np.angle((w * np.exp(1j * phi)).sum())
    return _weighted_rms(wrap_to_pi(phi - delta), w)


def kf_estimate(p):
    """LOS power over summed NLOS power; `inf` when the NLOS paths carry nothing."""
    p = np.asarray(p, dtype=float)
    if p.shape[0] < 2:
        raise ValueError("kf_estimate needs at least two paths")
    nlos = p[1:].sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        kf = np.where(nlos > 0, p[0] / np.where(nlos > 0, nlos, 1.0), np.inf)
    return float(kf) if kf.ndim == 0 else kf


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    values: np.ndarray
    probabilities: np.ndarray

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    def quantile(self, q: float) -> float:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile level must be in [0, 1], got {q}")
        idx = min(int(np.searchsorted(self.probabilities, q, side="left")), self.n - 1)
        return float(self.values[idx])

    def __call__(self, x):
        frac = np.searchsorted(self.values, x, side="right") / self.n
        return float(frac) if np.ndim(frac) == 0 else frac


def empirical_cdf(samples) -> EmpiricalCdf:
    values = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if values.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    if np.any(np.isnan(values)):
        raise ValueError("samples must not contain NaN")
    probs = np.arange(1, values.size + 1) / values.size
    values.flags.writeable = False
    probs.flags.writeable = False
    return EmpiricalCdf(values=values, probabilities=probs)


@dataclass(frozen=True, eq=False)
class SpreadReport:
    """Spreads recomputed from a PathTable, one entry per frequency."""

    frequencies_ghz: np.ndarray
    ds: np.ndarray
    asd: np.ndarray
    asa: np.ndarray
    esd: np.ndarray
    esa: np.ndarray
    kf: np.ndarray

    def residuals(self, lsf: LsfSample) -> dict[str, np.ndarray]:
        """Output minus requested value per parameter and frequency."""
        if lsf.n_freqs != self.frequencies_ghz.size:
            raise ValueError("LsfSample and report cover different frequencies")
        return {
            name: getattr(self, name) - getattr(lsf, name)
            for name in ("ds", "asd", "asa", "esd", "esa", "kf")
        }


def spread_report(table: PathTable) -> SpreadReport:
    cols = {name: np.empty(table.n_freqs) for name in ("ds", "asd", "asa", "esd", "esa")}
    for f in range(table.n_freqs):
        p = table.powers[:, f]
        cols["ds"][f] = delay_spread(table.tau, p)
        cols["asd"][f] = angular_spread(table.aod_az, p)
        cols["asa"][f] = angular_spread(table.aoa_az, p)
        cols["esd"][f] = angular_spread(table.aod_el, p)
        cols["esa"][f] = angular_spread(table.aoa_el, p)
    kf = np.atleast_1d(kf_estimate(table.powers))
    return SpreadReport(frequencies_ghz=table.frequencies_ghz, kf=kf, **cols)


@dataclass(frozen=True)
class SweepPoint:
    kf_db: float
    dimension: str
    achieved_as: float  # radians, averaged over trials


def max_as_sweep(
    kf_grid_db,
    target_as: float,
    dimension: str,
    cfg: "ScenarioConfig",
    trials: int = 100,
    seed: int = 0,
) -> list[SweepPoint]:
    """Achieved AS per K-factor when a spread of `target_as` radians is requested.

    Runs the full pipeline on a horizontal link at a single frequency with all four
    angular spreads requested at `target_as`. Each trial draws one FieldSet and
    reuses it across the whole KF grid. The achieved value is the mean of the
    departure and arrival spreads of `dimension`, averaged over trials.
    """
    from .ssf import generate_paths

    grid = [float(k) for k in kf_grid_db]
    if not grid:
        raise ValueError("kf grid must not be empty")
    if dimension not in ("azimuth", "elevation"):
        raise ValueError(f"dimension must be 'azimuth' or 'elevation', got {dimension!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    geom = LinkGeometry(tx_pos=SWEEP_TX, rx_pos=SWEEP_RX)
    freqs = [cfg.frequencies_ghz[0]]
    sums = np.zeros(len(grid))
    for trial in range(trials):
        fields = build_field_set(
            derive_seed(seed, SWEEP, trial),
            cfg.path_count,
            cfg.delay_acf,
            cfg.angle_acf,
            cfg.n_sinusoids,
        )
        for i, kf_db in enumerate(grid):
            lsf = LsfSample(
                frequencies_ghz=freqs,
                ds=[1e-7],
                asd=[target_as],
                asa=[target_as],
                esd=[target_as],
                esa=[target_as],
                kf=[10.0 ** (kf_db / 10.0)],
            )
            table = generate_paths(fields, geom, lsf, cfg)
            p = table.powers[:, 0]
            if dimension == "azimuth":
                pair = (angular_spread(table.aod_az, p), angular_spread(table.aoa_az, p))
            else:
                pair = (angular_spread(table.aod_el, p), angular_spread(table.aoa_el, p))
            sums[i] += 0.5 * (pair[0] + pair[1])
    points = [
        SweepPoint(kf_db=k, dimension=dimension, achieved_as=float(s / trials))
        for k, s in zip(grid, sums)
    ]
    logger.info("max-AS sweep %s: %d KF points x %d trials", dimension, len(grid), trials)
    return points
