"""Path generation: initial delays and angles, multi-frequency powers, KF/DS/AS
application and the LOS rotation.

Every stage is a pure function; the `Op` wrappers below chain them over a
`PathState` so a run can be traced stage by stage.
"""

import logging

import numpy as np
from scipy.special import erfc

from .core import (
    InitialPaths,
    LinkGeometry,
    LsfSample,
    PathState,
    PathTable,
    ScalingCoeffs,
)
from .corr_field import FieldSet, acf_target
from .metrics import angular_spread, delay_spread
from .ops import Op, Stack
from .utils import wrap_to_pi

logger = logging.getLogger(__name__)

__all__ = [
    "InitialPaths",
    "LinkGeometry",
    "LsfSample",
    "PathTable",
    "ScalingCoeffs",
    "reciprocal_uniform",
    "gen_initial_delays",
    "gen_initial_angles",
    "normalize_ds",
    "normalize_as",
    "compute_scaling_coeffs",
    "gen_initial_powers",
    "apply_kf",
    "scale_delays",
    "scale_angles",
    "los_angles",
    "rotate_to_los",
    "default_pipeline",
    "run_pipeline",
    "generate_paths",
]

AZIMUTH_SCALE_CAP = 3.0
ELEVATION_SCALE_CAP = 1.5
_TINY = np.finfo(float).tiny
_DEGENERATE_RTOL = 1e-12


def reciprocal_uniform(a, b, rho_tr):
    """Map two normal values seen from both link ends to one uniform value in (0, 1)."""
    rho = np.asarray(rho_tr, dtype=float)
    if np.any(~((rho >= 0.0) & (rho <= 1.0))):
        raise ValueError(f"rho_tr must lie in [0, 1], got {rho_tr}")
    s = np.asarray(a, dtype=float) + np.asarray(b, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("field values must be finite")
    u = 0.5 * erfc(-s / (2.0 * np.sqrt(rho + 1.0)))
    return float(u) if u.ndim == 0 else u


def gen_initial_delays(fields: FieldSet, geom: LinkGeometry) -> np.ndarray:
    """Unit-mean exponential initial delays; the LOS path sits at 0."""
    at_tx = fields.values_at(geom.tx_pos)["delay"]
    at_rx = fields.values_at(geom.rx_pos)["delay"]
    rho = acf_target(geom.distance_3d, fields.delay_acf)
    u = np.maximum(reciprocal_uniform(at_tx, at_rx, rho), _TINY)
    tau = np.concatenate([[0.0], -np.log(u)])
    tau.flags.writeable = False
    return tau


def _initial_angle(x, y):
    return 0.5 * np.pi * erfc(-(x + y) / 2.0) - 0.5 * np.pi


def gen_initial_angles(fields: FieldSet, geom: LinkGeometry):
    """Initial (phi_d, phi_a, theta_d, theta_a), uniform on (-pi/2, pi/2) for NLOS paths.

    Departure angles combine A at TX with B at RX, arrival angles B at TX with
    A at RX, so exchanging the link ends exchanges departure and arrival.
    """
    tx = fields.values_at(geom.tx_pos)
    rx = fields.values_at(geom.rx_pos)

    def with_los(nlos):
        out = np.concatenate([[0.0], nlos])
        out.flags.writeable = False
        return out

    phi_d = with_los(_initial_angle(tx["azimuth_a"], rx["azimuth_b"]))
    phi_a = with_los(_initial_angle(tx["azimuth_b"], rx["azimuth_a"]))
    theta_d = with_los(_initial_angle(tx["elevation_a"], rx["elevation_b"]))
    theta_a = with_los(_initial_angle(tx["elevation_b"], rx["elevation_a"]))
    return phi_d, phi_a, theta_d, theta_a


def _spreads(values, label: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{label} needs at least one frequency")
    if np.any(~(arr > 0)) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} values must be positive and finite")
    return arr


def normalize_ds(ds) -> np.ndarray:
    ds = _spreads(ds, "DS")
    return np.clip(ds / (ds.max() + ds.min()), 0.15, 0.85)


def normalize_as(spread) -> np.ndarray:
    spread = _spreads(spread, "AS")
    return np.maximum(0.75 * spread / spread.max(), 0.25)


def _log_coeff(scale: float, slope: float, offset: float, x: np.ndarray, label: str):
    arg = slope * x + offset
    if np.any(arg <= 0):
        raise ArithmeticError(f"{label} scaling coefficient: log argument {arg.min()} <= 0")
    return -scale * np.log(arg)


def compute_scaling_coeffs(lsf: LsfSample) -> ScalingCoeffs:
    ds_bar = normalize_ds(lsf.ds)
    return ScalingCoeffs(
        g_ds=_log_coeff(1.5, 1.2, -0.15, ds_bar, "DS"),
        g_asd=_log_coeff(2.2, 1.5, -0.35, normalize_as(lsf.asd), "ASD"),
        g_asa=_log_coeff(2.2, 1.5, -0.35, normalize_as(lsf.asa), "ASA"),
        g_esd=_log_coeff(3.4, 1.2, -0.1, normalize_as(lsf.esd), "ESD"),
        g_esa=_log_coeff(3.4, 1.2, -0.1, normalize_as(lsf.esa), "ESA"),
    )


def gen_initial_powers(init: InitialPaths, coeffs: ScalingCoeffs) -> np.ndarray:
    """Per-frequency initial powers, shape (L, F).

    Departure and arrival terms are summed pairwise before the exponential, so
    exchanging the link ends gives bit-identical powers.
    """
    tau = init.tau_tilde[:, None]
    az_d, az_a = init.phi_d[:, None] ** 2, init.phi_a[:, None] ** 2
    el_d, el_a = np.abs(init.theta_d)[:, None], np.abs(init.theta_a)[:, None]
    exponent = (
        tau * coeffs.g_ds
        + (az_d * coeffs.g_asd + az_a * coeffs.g_asa)
        + (el_d * coeffs.g_esd + el_a * coeffs.g_esa)
    )
    return np.exp(-exponent)


def apply_kf(p_tilde, kf) -> np.ndarray:
    """Set the LOS power to `kf` times the NLOS sum, then normalize to unit power."""
    p = np.array(p_tilde, dtype=float)
    flat = p.ndim == 1
    if flat:
        p = p[:, None]
    kf = np.broadcast_to(np.asarray(kf, dtype=float).reshape(-1), p.shape[1:])
    if p.shape[0] < 2:
        raise ValueError("apply_kf needs at least two paths")
    if np.any(~(kf >= 0)):
        raise ValueError("kf must be non-negative")
    nlos = p[1:].sum(axis=0)
    if np.any(~(nlos > 0)):
        raise ValueError("NLOS paths carry no power; scaling coefficients are invalid")
    p[0] = kf * nlos
    p = p / p.sum(axis=0)
    return p[:, 0] if flat else p


def scale_delays(tau_tilde, p, ds_target) -> np.ndarray:
    """Common delay vector (seconds) meeting the mean DS ratio over all frequencies."""
    tau_tilde = np.asarray(tau_tilde, dtype=float)
    p = np.asarray(p, dtype=float).reshape(tau_tilde.size, -1)
    ds_target = _spreads(ds_target, "DS")
    est = np.array([delay_spread(tau_tilde, p[:, f]) for f in range(p.shape[1])])
    if np.any(est <= _DEGENERATE_RTOL * np.abs(tau_tilde).max()):
        raise ValueError("initial delay spread is zero; delays cannot be scaled")
    factor = np.mean(ds_target / est)
    return tau_tilde * factor


def scale_angles(init_angles, p, as_target, dimension: str, cap: float | None = None):
    """Scale initial angles by the mean AS ratio, capped per dimension, wrapped to (-pi, pi]."""
    if dimension not in ("azimuth", "elevation"):
        raise ValueError(f"dimension must be 'azimuth' or 'elevation', got {dimension!r}")
    if cap is None:
        cap = AZIMUTH_SCALE_CAP if dimension == "azimuth" else ELEVATION_SCALE_CAP
    angles = np.asarray(init_angles, dtype=float)
    p = np.asarray(p, dtype=float).reshape(angles.size, -1)
    as_target = _spreads(as_target, "AS")
    est = np.array([angular_spread(angles, p[:, f]) for f in range(p.shape[1])])
    if np.any(est <= _DEGENERATE_RTOL):
        raise ValueError("initial angular spread is zero; angles cannot be scaled")
    s = float(np.mean(as_target / est))
    if s > cap:
        logger.debug("%s scale %.3f capped at %.1f", dimension, s, cap)
        s = cap
    return wrap_to_pi(angles * s)


def los_angles(geom: LinkGeometry) -> tuple[float, float, float, float]:
    """(phi_d, phi_a, theta_d, theta_a) of the direct path.

    Arrival angles come from the negated difference vector (signed zeros
    cleared), so the result is exactly the departure pair of the swapped link.
    """
    dx, dy, dz = geom.delta
    d2d = float(np.hypot(dx, dy))
    phi_d = float(np.arctan2(dy, dx))
    phi_a = float(np.arctan2(-dy + 0.0, -dx + 0.0))
    theta_d = float(np.arctan2(dz, d2d))
    theta_a = float(np.arctan2(-dz + 0.0, d2d))
    return phi_d, phi_a, theta_d, theta_a


def rotate_to_los(az, el, los_az: float, los_el: float):
    """Rotate path directions so that (0, 0) points along (los_az, los_el)."""
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    cx = np.cos(el) * np.cos(az)
    cy = np.cos(el) * np.sin(az)
    cz = np.sin(el)
    s_az, c_az = np.sin(los_az), np.cos(los_az)
    s_el, c_el = np.sin(los_el), np.cos(los_el)
    x = (c_el * c_az) * cx - s_az * cy - (s_el * c_az) * cz
    y = (c_el * s_az) * cx + c_az * cy - (s_el * s_az) * cz
    z = s_el * cx + c_el * cz
    return np.arctan2(y, x), np.arctan2(z, np.hypot(x, y))


class InitialDelays(Op):
    name = "InitialDelays"

    def forward(self, state: PathState) -> PathState:
        state.tau_tilde = gen_initial_delays(state.fields, state.geom)
        state.log(
            "initial_delays",
            paths=state.tau_tilde.size,
            mean=float(state.tau_tilde[1:].mean()),
        )
        return state


class InitialAngles(Op):
    name = "InitialAngles"

    def forward(self, state: PathState) -> PathState:
        if state.tau_tilde is None:
            raise ValueError("InitialAngles needs initial delays")
        phi_d, phi_a, theta_d, theta_a = gen_initial_angles(state.fields, state.geom)
        state.init = InitialPaths(state.tau_tilde, phi_d, phi_a, theta_d, theta_a)
        state.log("initial_angles", paths=state.init.path_count)
        return state


class ScalingCoefficients(Op):
    name = "ScalingCoefficients"

    def forward(self, state: PathState) -> PathState:
        state.coeffs = compute_scaling_coeffs(state.lsf)
        state.log("scaling_coeffs", g_ds=state.coeffs.g_ds.tolist())
        return state


class InitialPowers(Op):
    name = "InitialPowers"

    def forward(self, state: PathState) -> PathState:
        state.p_tilde = gen_initial_powers(state.init, state.coeffs)
        state.log("initial_powers", shape=list(state.p_tilde.shape))
        return state


class ApplyKFactor(Op):
    name = "ApplyKFactor"

    def forward(self, state: PathState) -> PathState:
        state.powers = apply_kf(state.p_tilde, state.lsf.kf)
        state.log("kf", los_power=state.powers[0].tolist())
        return state


class ScaleDelays(Op):
    name = "ScaleDelays"

    def forward(self, state: PathState) -> PathState:
        state.tau = scale_delays(state.init.tau_tilde, state.powers, state.lsf.ds)
        state.log("scale_delays", max_delay_s=float(state.tau.max()))
        return state


class ScaleAngles(Op):
    name = "ScaleAngles"

    def forward(self, state: PathState) -> PathState:
        cfg, init, lsf = state.cfg, state.init, state.lsf
        az_cap = getattr(cfg, "azimuth_scale_cap", AZIMUTH_SCALE_CAP)
        el_cap = getattr(cfg, "elevation_scale_cap", ELEVATION_SCALE_CAP)
        plan = {
            "aod_az": (init.phi_d, lsf.asd, "azimuth", az_cap),
            "aoa_az": (init.phi_a, lsf.asa, "azimuth", az_cap),
            "aod_el": (init.theta_d, lsf.esd, "elevation", el_cap),
            "aoa_el": (init.theta_a, lsf.esa, "elevation", el_cap),
        }
        for key, (angles, target, dimension, cap) in plan.items():
            state.angles[key] = scale_angles(angles, state.powers, target, dimension, cap)
        state.log("scale_angles", dims=len(plan))
        return state


class LosRotation(Op):
    name = "LosRotation"

    def forward(self, state: PathState) -> PathState:
        phi_d, phi_a, theta_d, theta_a = los_angles(state.geom)
        a = state.angles
        a["aod_az"], a["aod_el"] = rotate_to_los(a["aod_az"], a["aod_el"], phi_d, theta_d)
        a["aoa_az"], a["aoa_el"] = rotate_to_los(a["aoa_az"], a["aoa_el"], phi_a, theta_a)
        state.log("los_rotation", phi_d=phi_d, phi_a=phi_a, theta_d=theta_d, theta_a=theta_a)
        return state


def default_pipeline() -> Stack:
    return Stack(
        InitialDelays(),
        InitialAngles(),
        ScalingCoefficients(),
        InitialPowers(),
        ApplyKFactor(),
        ScaleDelays(),
        ScaleAngles(),
        LosRotation(),
        name="generate_paths",
    )


def run_pipeline(fields: FieldSet, geom: LinkGeometry, lsf: LsfSample, cfg) -> PathState:
    """Run every stage and return the final state, trace included."""
    if getattr(cfg, "path_count", fields.path_count) != fields.path_count:
        raise ValueError(
            f"FieldSet has {fields.path_count} paths, config asks for {cfg.path_count}"
        )
    state = PathState(fields=fields, geom=geom, lsf=lsf, cfg=cfg)
    return default_pipeline()(state)


def generate_paths(fields: FieldSet, geom: LinkGeometry, lsf: LsfSample, cfg) -> PathTable:
    return run_pipeline(fields, geom, lsf, cfg).to_table()
