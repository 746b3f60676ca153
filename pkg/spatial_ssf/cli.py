"""Command-line harness: UMi evaluation, max-AS sweep, ACF check and single-link dumps."""

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .banner import banner
from .core import LinkGeometry, LsfSample
from .corr_field import AcfSpec, acf_target, build_field, build_field_set, empirical_acf
from .lsf import (
    CONDITIONS,
    ScenarioConfig,
    default_config_path,
    load_config,
    load_scenario,
    sample_lsf,
)
from .metrics import empirical_cdf, max_as_sweep, spread_report
from .ssf import run_pipeline
from .utils import ACF_CHECK, FIELDS, LSF, PLACEMENT, derive_seed, summarize_timings

logger = logging.getLogger("spatial_ssf")
err_console = Console(stderr=True, soft_wrap=True)

EVAL_PARAMETERS = ("ds", "asd", "asa", "esd", "esa")
EVAL_HEADER = ("frequency_ghz", "condition", "input_value", "output_value")
SUMMARY_HEADER = (
    "parameter",
    "condition",
    "frequency_ghz",
    "input_median",
    "output_median",
    "median_ratio",
    "unit",
)
ACF_HEADER = ("d_lambda_m", "distance_m", "empirical_rho", "target_rho")
MAX_AS_HEADER = ("kf_db", "dimension", "achieved_as_deg")
REQUESTED_AS_DEG = 100.0
ACF_PAIRS = 10_000


@dataclass(frozen=True)
class RunSpec:
    command: str
    config: Path
    seed: int = 0
    mts: int = 500
    radius_m: float = 200.0
    bs_height_m: float = 10.0
    mt_height_m: float = 1.5
    out: Path | None = None
    frequencies_ghz: tuple[float, ...] | None = None
    workers: int = 1
    condition: str | None = None
    kf_min: float = -30.0
    kf_max: float = 30.0
    kf_step: float = 2.0
    trials: int = 100
    dimension: str = "both"
    tx: tuple[float, float, float] = (0.0, 0.0, 10.0)
    rx: tuple[float, float, float] = (100.0, 0.0, 1.5)
    trace: bool = False

    def __post_init__(self):
        if self.mts < 1:
            raise ValueError("MT count must be >= 1")
        if not self.radius_m > 0:
            raise ValueError("cell radius must be positive")
        if self.bs_height_m < 0 or self.mt_height_m < 0:
            raise ValueError("heights must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.condition is not None and self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")

    @property
    def out_dir(self) -> Path:
        return self.out if self.out is not None else Path("out")


@dataclass(frozen=True)
class EvalRow:
    parameter: str
    condition: str
    frequency_ghz: float
    mt: int
    input_value: float
    output_value: float


@dataclass(frozen=True)
class SummaryRow:
    parameter: str
    condition: str
    frequency_ghz: float
    input_median: float
    output_median: float
    unit: str

    @property
    def median_ratio(self) -> float:
        return self.output_median / self.input_median


@dataclass
class EvalResult:
    rows: list[EvalRow]
    # requested LSF per condition, in MT order
    samples: dict[str, list[LsfSample]] = field(default_factory=dict)

    def select(self, parameter: str, condition: str, frequency_ghz: float):
        """(input, output) arrays in MT order for one CDF dataset."""
        picked = [
            r
            for r in self.rows
            if r.parameter == parameter
            and r.condition == condition
            and r.frequency_ghz == frequency_ghz
        ]
        return (
            np.array([r.input_value for r in picked]),
            np.array([r.output_value for r in picked]),
        )

    def datasets(self) -> list[tuple[str, str, float]]:
        seen: dict[tuple[str, str, float], None] = {}
        for r in self.rows:
            seen.setdefault((r.parameter, r.condition, r.frequency_ghz), None)
        return list(seen)

    def summary(self) -> list[SummaryRow]:
        out = []
        for parameter, condition, freq in self.datasets():
            inp, outp = self.select(parameter, condition, freq)
            out.append(
                SummaryRow(
                    parameter=parameter,
                    condition=condition,
                    frequency_ghz=freq,
                    input_median=empirical_cdf(inp).median,
                    output_median=empirical_cdf(outp).median,
                    unit="s" if parameter == "ds" else "deg",
                )
            )
        return out


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("wrote %s", path)
    return path


def _scenario(spec: RunSpec) -> dict[str, ScenarioConfig]:
    scenario = load_scenario(spec.config)
    if spec.frequencies_ghz:
        scenario = {c: cfg.with_frequencies(spec.frequencies_ghz) for c, cfg in scenario.items()}
    return scenario


def _condition_config(spec: RunSpec, default: str) -> tuple[int, ScenarioConfig]:
    condition = spec.condition or default
    cfg = load_config(spec.config, condition)
    if spec.frequencies_ghz:
        cfg = cfg.with_frequencies(spec.frequencies_ghz)
    return CONDITIONS.index(condition), cfg


def _field_set(spec: RunSpec, cond_idx: int, cfg: ScenarioConfig):
    return build_field_set(
        derive_seed(spec.seed, FIELDS, cond_idx),
        cfg.path_count,
        cfg.delay_acf,
        cfg.angle_acf,
        cfg.n_sinusoids,
    )


def place_mts(n: int, radius_m: float, height_m: float, seed: int) -> np.ndarray:
    """MT positions uniform over a disk around the origin, shape (n, 3)."""
    rng = np.random.default_rng(derive_seed(seed, PLACEMENT))
    r = radius_m * np.sqrt(rng.random(n))
    az = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack([r * np.cos(az), r * np.sin(az), np.full(n, height_m)], axis=1)


def run_eval(spec: RunSpec) -> EvalResult:
    """Both conditions for every MT of one shared drop; spreads in s and deg."""
    scenario = _scenario(spec)
    bs = np.array([0.0, 0.0, spec.bs_height_m])
    mts = place_mts(spec.mts, spec.radius_m, spec.mt_height_m, spec.seed)
    rows: list[EvalRow] = []
    samples: dict[str, list[LsfSample]] = {}
    for cond_idx, condition in enumerate(CONDITIONS):
        if condition not in scenario:
            continue
        cfg = scenario[condition]
        fields = _field_set(spec, cond_idx, cfg)

        def one(i: int, cfg=cfg, fields=fields, cond_idx=cond_idx):
            geom = LinkGeometry(tx_pos=bs, rx_pos=mts[i])
            lsf = sample_lsf(cfg, geom, derive_seed(spec.seed, LSF, cond_idx, i))
            report = spread_report(run_pipeline(fields, geom, lsf, cfg).to_table())
            return lsf, report

        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(one, range(spec.mts)))
        samples[condition] = [lsf for lsf, _ in results]
        logger.info("%s: %d MTs generated", condition, spec.mts)

        for parameter in EVAL_PARAMETERS:
            scale = 1.0 if parameter == "ds" else 180.0 / np.pi
            for f, freq in enumerate(cfg.frequencies_ghz):
                for i, (lsf, report) in enumerate(results):
                    rows.append(
                        EvalRow(
                            parameter=parameter,
                            condition=condition,
                            frequency_ghz=float(freq),
                            mt=i,
                            input_value=scale * float(getattr(lsf, parameter)[f]),
                            output_value=scale * float(getattr(report, parameter)[f]),
                        )
                    )
    return EvalResult(rows=rows, samples=samples)


def _print_summary(summary: list[SummaryRow]):
    table = Table(title="input vs output medians")
    for col in ("parameter", "condition", "f [GHz]", "input", "output", "ratio"):
        table.add_column(col)
    for s in summary:
        table.add_row(
            s.parameter,
            s.condition,
            f"{s.frequency_ghz:g}",
            f"{s.input_median:.4g} {s.unit}",
            f"{s.output_median:.4g} {s.unit}",
            f"{s.median_ratio:.3f}",
        )
    err_console.print(table)


def cmd_eval(spec: RunSpec) -> dict[str, Path]:
    result = run_eval(spec)
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for parameter in EVAL_PARAMETERS:
        rows = [
            (_fmt(r.frequency_ghz), r.condition, _fmt(r.input_value), _fmt(r.output_value))
            for r in result.rows
            if r.parameter == parameter
        ]
        written[parameter] = _write_csv(out / f"{parameter}.csv", EVAL_HEADER, rows)
    summary = result.summary()
    written["summary"] = _write_csv(
        out / "summary.csv",
        SUMMARY_HEADER,
        [
            (
                s.parameter,
                s.condition,
                _fmt(s.frequency_ghz),
                _fmt(s.input_median),
                _fmt(s.output_median),
                _fmt(s.median_ratio),
                s.unit,
            )
            for s in summary
        ],
    )
    _print_summary(summary)
    return written


def kf_grid(kf_min: float, kf_max: float, kf_step: float) -> np.ndarray:
    if not kf_step > 0:
        raise ValueError("kf step must be positive")
    if kf_max < kf_min:
        raise ValueError("kf max must not be below kf min")
    n = int(np.floor((kf_max - kf_min) / kf_step + 1e-9)) + 1
    return np.round(kf_min + kf_step * np.arange(n), 10)


def cmd_max_as(spec: RunSpec) -> dict[str, Path]:
    _, cfg = _condition_config(spec, "NLOS")
    grid = kf_grid(spec.kf_min, spec.kf_max, spec.kf_step)
    dims = ("azimuth", "elevation") if spec.dimension == "both" else (spec.dimension,)
    rows = []
    for dim in dims:
        points = max_as_sweep(
            grid, np.deg2rad(REQUESTED_AS_DEG), dim, cfg, trials=spec.trials, seed=spec.seed
        )
        rows += [(_fmt(p.kf_db), p.dimension, _fmt(np.rad2deg(p.achieved_as))) for p in points]
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return {"max_as": _write_csv(out / "max_as.csv", MAX_AS_HEADER, rows)}


def cmd_acf_check(spec: RunSpec) -> dict[str, Path]:
    scenario = _scenario(spec)
    d_lambdas = sorted(
        {cfg.delay_acf.d_lambda for cfg in scenario.values()}
        | {cfg.angle_acf.d_lambda for cfg in scenario.values()}
    )
    n_sinusoids = next(iter(scenario.values())).n_sinusoids
    rows = []
    for i, d_lambda in enumerate(d_lambdas):
        acf = AcfSpec(d_lambda)
        acf_field = build_field(derive_seed(spec.seed, ACF_CHECK, i), acf, n_sinusoids)
        distances = d_lambda * np.arange(17) / 4.0
        rho = empirical_acf(
            acf_field, distances, n_pairs=ACF_PAIRS, seed=derive_seed(spec.seed, ACF_CHECK, i, 1)
        )
        target = acf_target(distances, acf)
        rows += [
            (_fmt(d_lambda), _fmt(d), f"{r:.6f}", f"{t:.6f}")
            for d, r, t in zip(distances, rho, target)
        ]
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return {"acf_check": _write_csv(out / "acf_check.csv", ACF_HEADER, rows)}


def _print_timings(state):
    timings = summarize_timings(state)
    table = Table(title="stage timings")
    table.add_column("stage")
    table.add_column("ms", justify="right")
    for name, seconds in timings["per_op"].items():
        table.add_row(name, f"{1e3 * seconds:.3f}")
    table.add_row("overall", f"{1e3 * (timings['overall'] or 0.0):.3f}")
    err_console.print(table)


def cmd_gen(spec: RunSpec) -> dict:
    cond_idx, cfg = _condition_config(spec, "LOS")
    geom = LinkGeometry(tx_pos=spec.tx, rx_pos=spec.rx)
    fields = _field_set(spec, cond_idx, cfg)
    lsf = sample_lsf(cfg, geom, derive_seed(spec.seed, LSF, cond_idx))
    state = run_pipeline(fields, geom, lsf, cfg)
    doc = {
        "condition": cfg.condition,
        "tx_pos": list(geom.tx_pos.tolist()),
        "rx_pos": list(geom.rx_pos.tolist()),
        **state.to_table().to_dict(),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if spec.out is not None:
        spec.out.mkdir(parents=True, exist_ok=True)
        path = spec.out / "gen.json"
        path.write_text(text, encoding="utf-8")
        logger.info("wrote %s", path)
    else:
        sys.stdout.write(text)
    if spec.trace:
        _print_timings(state)
    return doc


COMMANDS = {
    "eval": cmd_eval,
    "max-as": cmd_max_as,
    "acf-check": cmd_acf_check,
    "gen": cmd_gen,
}


def _triple(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from e


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as one `error: UsageError: ...` line, exit code 2."""

    def error(self, message):
        message = " ".join(message.split())
        err_console.print(
            f"error: UsageError: {self.prog}: {message}", markup=False, highlight=False
        )
        self.exit(2)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="scenario TOML file")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--mts", type=int, default=500, help="number of MTs")
    common.add_argument("--radius-m", type=float, default=200.0, help="cell radius")
    common.add_argument("--bs-height-m", type=float, default=10.0, help="BS height")
    common.add_argument("--mt-height-m", type=float, default=1.5, help="MT height")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument(
        "--frequencies-ghz", type=float, nargs="+", default=None, help="override frequencies"
    )
    common.add_argument("--workers", type=int, default=1, help="threads for per-MT generation")
    common.add_argument("-v", "--verbose", action="count", default=0, help="increase verbosity")

    parser = _Parser(
        prog="spatial-ssf",
        description="Spatially consistent multi-frequency small-scale fading paths",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="UMi input/output spread evaluation")

    max_as = sub.add_parser("max-as", parents=[common], help="achievable AS vs K-factor")
    max_as.add_argument("--kf-min", type=float, default=-30.0)
    max_as.add_argument("--kf-max", type=float, default=30.0)
    max_as.add_argument("--kf-step", type=float, default=2.0)
    max_as.add_argument("--trials", type=int, default=100)
    max_as.add_argument(
        "--dimension", choices=("azimuth", "elevation", "both"), default="both"
    )
    max_as.add_argument("--condition", choices=CONDITIONS, default="NLOS")

    sub.add_parser("acf-check", parents=[common], help="empirical vs target field ACF")

    gen = sub.add_parser("gen", parents=[common], help="path table of one link as JSON")
    gen.add_argument("--tx", type=_triple, default=(0.0, 0.0, 10.0), help="x,y,z in meters")
    gen.add_argument("--rx", type=_triple, default=(100.0, 0.0, 1.5), help="x,y,z in meters")
    gen.add_argument("--condition", choices=CONDITIONS, default="LOS")
    gen.add_argument("--trace", action="store_true", help="print per-stage timings")
    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    extra = {
        key: getattr(args, key)
        for key in (
            "condition",
            "kf_min",
            "kf_max",
            "kf_step",
            "trials",
            "dimension",
            "tx",
            "rx",
            "trace",
        )
        if hasattr(args, key)
    }
    return RunSpec(
        command=args.command,
        config=args.config or default_config_path(),
        seed=args.seed,
        mts=args.mts,
        radius_m=args.radius_m,
        bs_height_m=args.bs_height_m,
        mt_height_m=args.mt_height_m,
        out=args.out,
        frequencies_ghz=tuple(args.frequencies_ghz) if args.frequencies_ghz else None,
        workers=args.workers,
        **extra,
    )


def setup_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    if args.verbose:
        banner()
    try:
        spec = spec_from_args(args)
        COMMANDS[spec.command](spec)
    except (ValueError, ArithmeticError, OSError) as e:
        message = " ".join(str(e).split())
        err_console.print(f"error: {type(e).__name__}: {message}", markup=False, highlight=False)
        return 1
    return 0
