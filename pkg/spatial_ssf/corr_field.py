"""Spatially correlated standard-normal random fields built from sums of sinusoids.

A field is `sqrt(2/N) * sum_i cos(k_i . p + phi_i)`. The wave-vectors are
isotropic: directions are uniform on the sphere and the radial wavenumbers are
drawn from a density matched to the composite Gaussian/exponential ACF.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import nnls

from .utils import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_DECORRELATION_M = 15.0
DEFAULT_SINUSOIDS = 500
FIELD_KINDS = ("delay", "azimuth_a", "azimuth_b", "elevation_a", "elevation_b")

# Spectral table grids, in units of d_lambda (distances) and 1/d_lambda (wavenumbers).
_K_MAX = 20.0
_K_BINS = 400
_D_MAX = 6.0
_D_POINTS = 601
_EVAL_CHUNK = 2048


@dataclass(frozen=True)
class AcfSpec:
    d_lambda: float = DEFAULT_DECORRELATION_M

    def __post_init__(self):
        if not (np.isfinite(self.d_lambda) and self.d_lambda > 0):
            raise ValueError(f"d_lambda must be a positive distance, got {self.d_lambda}")


def acf_target(d, spec: AcfSpec):
    """Composite ACF: Gaussian below d_lambda, exponential from d_lambda on."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(np.isnan(d_arr)) or np.any(d_arr < 0):
        raise ValueError("distance must be non-negative")
    x = d_arr / spec.d_lambda
    rho = np.where(x < 1.0, np.exp(-x * x), np.exp(-x))
    return float(rho) if rho.ndim == 0 else rho


@dataclass(frozen=True)
class _RadialTable:
    lo: np.ndarray
    width: float
    cdf_lo: np.ndarray
    weights: np.ndarray
    max_fit_error: float

    def sample(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cdf_lo, u, side="right") - 1
        idx = np.clip(idx, 0, self.weights.size - 1)
        frac = np.clip((u - self.cdf_lo[idx]) / self.weights[idx], 0.0, 1.0)
        return self.lo[idx] + frac * self.width


@lru_cache(maxsize=1)
def _radial_table() -> _RadialTable:
    """Radial wavenumber density for d_lambda = 1, as a piecewise-constant table.

    The plain 3-D transform of the composite ACF has negative lobes (the slope
    jumps at d_lambda), so the density is the non-negative least-squares fit of
    the ACF by the isotropic kernel sin(kd)/(kd).
    """
    width = _K_MAX / _K_BINS
    centers = (np.arange(_K_BINS) + 0.5) * width
    d = np.linspace(0.0, _D_MAX, _D_POINTS)
    kernel = np.sinc(np.outer(d, centers) / np.pi)
    target = acf_target(d, AcfSpec(1.0))

    # heavy row pins rho(0) = sum(weights) = 1
    A = np.vstack([kernel, np.full(_K_BINS, 100.0)])
    b = np.concatenate([target, [100.0]])
    weights, _ = nnls(A, b, maxiter=50 * _K_BINS)
    weights = weights / weights.sum()
    fit_error = float(np.max(np.abs(kernel @ weights - target)))
    logger.debug("radial spectrum fitted: %d bins, max ACF error %.4f", _K_BINS, fit_error)

    keep = weights > 0
    lo = (np.arange(_K_BINS) * width)[keep]
    w = weights[keep]
    cdf_lo = np.concatenate([[0.0], np.cumsum(w)[:-1]])
    for arr in (lo, w, cdf_lo):
        arr.flags.writeable = False
    return _RadialTable(lo=lo, width=width, cdf_lo=cdf_lo, weights=w, max_fit_error=fit_error)


@dataclass(frozen=True, eq=False)
class Field:
    seed: int
    acf: AcfSpec
    wavevectors: np.ndarray
    phases: np.ndarray

    @property
    def n_sinusoids(self) -> int:
        return self.phases.size

    def __call__(self, pos):
        return evaluate(self, pos)


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def build_field(seed: int, spec: AcfSpec, n_sinusoids: int = DEFAULT_SINUSOIDS) -> Field:
    if n_sinusoids < 1:
        raise ValueError("n_sinusoids must be >= 1")
    seed = _check_seed(seed)
    rng = np.random.default_rng(seed)
    n = int(n_sinusoids)

    # stratified quantiles keep the realized spectrum close to the target one
    u = (np.arange(n) + rng.random(n)) / n
    k = _radial_table().sample(u) / spec.d_lambda

    cos_t = rng.uniform(-1.0, 1.0, n)
    az = rng.uniform(0.0, 2.0 * np.pi, n)
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    directions = np.stack([sin_t * np.cos(az), sin_t * np.sin(az), cos_t], axis=1)
    wavevectors = k[:, None] * directions
    phases = rng.uniform(0.0, 2.0 * np.pi, n)

    wavevectors.flags.writeable = False
    phases.flags.writeable = False
    return Field(seed=seed, acf=spec, wavevectors=wavevectors, phases=phases)


def _positions(pos) -> np.ndarray:
    p = np.asarray(pos, dtype=float)
    if p.shape[-1:] != (3,) or p.ndim > 2:
        raise ValueError(f"positions must have shape (3,) or (m, 3), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("positions must be finite")
    return p


def _sum_of_sinusoids(p: np.ndarray, k: np.ndarray, phases: np.ndarray) -> np.ndarray:
    phase = p[..., 0:1] * k[..., 0] + p[..., 1:2] * k[..., 1] + p[..., 2:3] * k[..., 2]
    return np.sqrt(2.0 / phases.shape[-1]) * np.cos(phase + phases).sum(axis=-1)


def evaluate(field: Field, pos):
    """Field value at one position (float) or at each row of an (m, 3) array."""
    p = _positions(pos)
    if p.ndim == 1:
        return float(_sum_of_sinusoids(p[None, :], field.wavevectors, field.phases)[0])
    out = np.empty(p.shape[0])
    for start in range(0, p.shape[0], _EVAL_CHUNK):
        block = p[start : start + _EVAL_CHUNK]
        out[start : start + block.shape[0]] = _sum_of_sinusoids(
            block, field.wavevectors, field.phases
        )
    return out


@dataclass(frozen=True, eq=False)
class FieldSet:
    """Independent fields for every NLOS path (paths 2..L), grouped by kind.

    Departure and arrival angles of one angle type share their (A, B) pair, so
    each NLOS path owns five fields.
    """

    path_count: int
    delay_acf: AcfSpec
    angle_acf: AcfSpec
    fields: dict[str, tuple[Field, ...]]

    def __post_init__(self):
        if self.path_count < 2:
            raise ValueError("path_count must be >= 2")
        if set(self.fields) != set(FIELD_KINDS):
            raise ValueError(f"FieldSet needs exactly the kinds {FIELD_KINDS}")
        if any(len(self.fields[kind]) != self.path_count - 1 for kind in FIELD_KINDS):
            raise ValueError("every kind needs one field per NLOS path")
        k = np.stack(
            [np.stack([f.wavevectors for f in self.fields[kind]]) for kind in FIELD_KINDS]
        )
        ph = np.stack([np.stack([f.phases for f in self.fields[kind]]) for kind in FIELD_KINDS])
        k.flags.writeable = False
        ph.flags.writeable = False
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_phases", ph)

    @property
    def field_count(self) -> int:
        return len(FIELD_KINDS) * (self.path_count - 1)

    def values_at(self, pos) -> dict[str, np.ndarray]:
        """Values of every field at one position, keyed by kind, shape (L-1,) each."""
        p = _positions(pos)
        if p.ndim != 1:
            raise ValueError("values_at takes a single position")
        vals = _sum_of_sinusoids(p, self._k, self._phases)
        return {kind: vals[i] for i, kind in enumerate(FIELD_KINDS)}


def build_field_set(
    master_seed: int,
    path_count: int,
    delay_acf: AcfSpec | None = None,
    angle_acf: AcfSpec | None = None,
    n_sinusoids: int = DEFAULT_SINUSOIDS,
) -> FieldSet:
    if path_count < 2:
        raise ValueError("path_count must be >= 2")
    delay_acf = delay_acf or AcfSpec()
    angle_acf = angle_acf or AcfSpec()
    fields: dict[str, tuple[Field, ...]] = {}
    for kind_idx, kind in enumerate(FIELD_KINDS):
        spec = delay_acf if kind == "delay" else angle_acf
        fields[kind] = tuple(
            build_field(derive_seed(master_seed, kind_idx, path), spec, n_sinusoids)
            for path in range(1, path_count)
        )
    return FieldSet(
        path_count=path_count, delay_acf=delay_acf, angle_acf=angle_acf, fields=fields
    )


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0:
        return float("nan")
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def empirical_acf(
    field: Field,
    distances,
    n_pairs: int = 10_000,
    seed: int = 0,
    extent_m: float | None = None,
    origin=(0.0, 0.0, 0.0),
) -> np.ndarray:
    """Sample correlation of field values at random pairs separated by each distance.

    Pair anchors are uniform in a cube of side `extent_m` placed at `origin`;
    pair directions are uniform on the sphere.
    """
    dist = np.asarray(distances, dtype=float).reshape(-1)
    if np.any(dist < 0):
        raise ValueError("distances must be non-negative")
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    extent = extent_m if extent_m is not None else 200.0 * field.acf.d_lambda
    rng = np.random.default_rng(seed)
    anchors = np.asarray(origin, dtype=float) + rng.uniform(0.0, extent, (n_pairs, 3))
    cos_t = rng.uniform(-1.0, 1.0, n_pairs)
    az = rng.uniform(0.0, 2.0 * np.pi, n_pairs)
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    unit = np.stack([sin_t * np.cos(az), sin_t * np.sin(az), cos_t], axis=1)

    base = evaluate(field, anchors)
    rho = np.empty(dist.size)
    for i, d in enumerate(dist):
        rho[i] = _pearson(base, evaluate(field, anchors + d * unit))
    return rho
