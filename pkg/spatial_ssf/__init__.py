__version__ = "0.1.0"

from .core import InitialPaths, LinkGeometry, LsfSample, PathState, PathTable, ScalingCoeffs
from .corr_field import (
    AcfSpec,
    Field,
    FieldSet,
    acf_target,
    build_field,
    build_field_set,
    empirical_acf,
    evaluate,
)
from .lsf import (
    ConfigError,
    ParamDistribution,
    ScenarioConfig,
    default_config_path,
    load_config,
    load_scenario,
    sample_lsf,
)
from .metrics import (
    EmpiricalCdf,
    SpreadReport,
    SweepPoint,
    angular_spread,
    delay_spread,
    empirical_cdf,
    kf_estimate,
    max_as_sweep,
    spread_report,
)
from .ops import Op, Stack
from .ssf import (
    apply_kf,
    compute_scaling_coeffs,
    default_pipeline,
    gen_initial_angles,
    gen_initial_delays,
    gen_initial_powers,
    generate_paths,
    los_angles,
    normalize_as,
    normalize_ds,
    reciprocal_uniform,
    rotate_to_los,
    run_pipeline,
    scale_angles,
    scale_delays,
)
