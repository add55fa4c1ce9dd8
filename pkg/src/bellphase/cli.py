"""Command-line front end: estimates, CHSH values, scans and verification tables."""

import argparse
import logging
import math
import os
import sys
from collections.abc import Sequence
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np
import structlog
from frozendict import frozendict
from structlog.stdlib import BoundLogger

from bellphase.correlations import (
    DEFAULT_SCAN_RESOLUTION,
    ChshResult,
    ChshSettings,
    ConditionOn,
    ExpectationSource,
    analytic_E_dyn,
    analytic_E_ring,
    analytic_E_stat,
    analytic_source,
    bell_local_E,
    bell_local_source,
    chsh,
    chsh_scan,
    mc_E_dyn,
    mc_E_stat_ring,
    mc_E_stat_stratified,
    monte_carlo_source,
    ring_chsh,
)
from bellphase.detectors import DEFAULT_LAMBDA0, Family, check_mixing_weight, check_ring_width
from bellphase.ensembles import GaugeConfig, Mode, parse_half_integer
from bellphase.errors import BellphaseError, ConfigurationError, ContractViolation
from bellphase.geometry import Axis, RngStream
from bellphase.records import OutputFormat, Row, render, write_atomic
from bellphase.verification import (
    Witness,
    contradiction_gap,
    density_histogram_check,
    hemisphere_overlap_mc,
    indicator_gap_sigmas,
    witness_check,
)

SEED_VARIABLE = "BELLPHASE_SEED"
DEFAULT_SAMPLES = 10**6
DEFAULT_BINS = 100
DEFAULT_DELTA_GRID = 181

logger: BoundLogger = structlog.get_logger(module=__name__)


class Model(Enum):
    STATISTICAL = "statistical"
    DYNAMICAL = "dynamical"
    BELL_LOCAL = "bell-local"


class Estimator(Enum):
    ANALYTIC = "analytic"
    MC = "mc"
    BOTH = "both"

    @property
    def analytic(self) -> bool:
        return self is not Estimator.MC

    @property
    def monte_carlo(self) -> bool:
        return self is not Estimator.ANALYTIC


def parse_angle(text: str) -> float:
    """Radians by default; "45deg", "pi/4", "3pi/4" and "-pi" are also accepted."""
    cleaned = text.strip().lower().replace("*", "").replace(" ", "")

    try:
        if cleaned.endswith("deg"):
            value = math.radians(float(cleaned.removesuffix("deg")))

        elif "pi" in cleaned:
            numerator, _, denominator = cleaned.partition("/")
            coefficient = numerator.replace("pi", "")
            value = math.pi * float(coefficient + "1" if coefficient in ("", "+", "-") else coefficient)
            value = value / float(denominator) if denominator else value

        else:
            value = float(cleaned)

    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot read angle {text!r}") from exc

    if not math.isfinite(value):
        raise ConfigurationError(f"angle must be finite, got {text!r}")

    return value


def parse_axes(text: str) -> tuple[float, ...]:
    return tuple(parse_angle(part) for part in text.split(",") if part.strip())


def parse_count(text: str, name: str = "samples") -> int:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigurationError(f"cannot read {name} from {text!r}") from exc

    if not (math.isfinite(value) and value.is_integer() and value >= 1):
        raise ConfigurationError(f"{name} must be a positive integer, got {text!r}")

    return int(value)


def parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigurationError(f"cannot read {name} from {text!r}") from exc

    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {text!r}")

    return value


def resolve_seed(flag: str | None) -> int:
    text = flag if flag is not None else os.environ.get(SEED_VARIABLE, "0")

    try:
        seed = int(text)
    except ValueError as exc:
        raise ConfigurationError(f"cannot read seed from {text!r}") from exc

    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must lie in [0, 2**64), got {seed}")

    return seed


@dataclass(frozen=True)
class RunConfig:
    command: str
    mode: Model
    L: str
    twice_L: int
    axes: tuple[float, ...]
    eps: float | None
    samples: int | None
    seed: int
    substreams: int
    family: Family
    lambda0: float
    conditioning: ConditionOn
    estimator: Estimator
    grid: int | None
    J0: float | None
    Jz0: float | None
    bins: int
    edge_exclusion: float | None
    output_format: OutputFormat
    output: Path | None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        twice_L = parse_half_integer(args.L)

        config = cls(
            command=args.command,
            mode=Model(args.mode),
            L=GaugeConfig(twice_L).label(),
            twice_L=twice_L,
            axes=parse_axes(args.axes) if args.axes else (),
            eps=parse_float(args.eps, "eps") if args.eps is not None else None,
            samples=parse_count(args.samples) if args.samples is not None else None,
            seed=resolve_seed(args.seed),
            substreams=parse_count(args.substreams, "substreams"),
            family=Family(args.family),
            lambda0=parse_float(args.lambda0, "lambda0"),
            conditioning=ConditionOn(args.conditioning),
            estimator=Estimator(args.estimator),
            grid=parse_count(args.grid, "grid") if args.grid is not None else None,
            J0=parse_float(args.J0, "J0") if args.J0 is not None else None,
            Jz0=parse_float(args.Jz0, "Jz0") if args.Jz0 is not None else None,
            bins=parse_count(args.bins, "bins"),
            edge_exclusion=(
                parse_angle(args.edge_exclusion) if args.edge_exclusion is not None else None
            ),
            output_format=OutputFormat(args.format),
            output=Path(args.output) if args.output not in (None, "-") else None,
        )

        config.validate()

        return config

    def validate(self) -> None:
        if self.eps is not None:
            check_ring_width(self.eps)

        check_mixing_weight(self.lambda0)

        if self.mode is Model.DYNAMICAL and self.family is Family.FORCED and self.twice_L != 1:
            raise ConfigurationError("forced probabilities exist only for L = 1/2")

        if self.mode is Model.BELL_LOCAL and self.estimator is Estimator.ANALYTIC:
            raise ConfigurationError("the bell-local baseline has no closed form")

    def gauge(self) -> GaugeConfig:
        match self.mode:
            case Model.STATISTICAL:
                return GaugeConfig(self.twice_L, Mode.STATISTICAL)

            case Model.DYNAMICAL | Model.BELL_LOCAL:
                return GaugeConfig(self.twice_L, Mode.DYNAMICAL)

    def require_axes(self, count: int) -> tuple[Axis, ...]:
        if len(self.axes) != count:
            raise ConfigurationError(
                f"{self.command} needs exactly {count} axes, got {len(self.axes)}"
            )

        return tuple(Axis(theta) for theta in self.axes)

    def sample_count(self) -> int:
        return self.samples if self.samples is not None else DEFAULT_SAMPLES

    def stream(self, index: int = 0) -> RngStream:
        return RngStream(self.seed, index)

    def to_record(self) -> frozendict:
        # everything needed to rerun, nothing about where the output went
        skipped = {"output", "output_format"}

        return frozendict(
            (item.name, getattr(self, item.name)) for item in fields(self) if item.name not in skipped
        )


def _estimate_source(config: RunConfig, gauge: GaugeConfig) -> ExpectationSource:
    n, stream = config.sample_count(), config.stream()

    match config.mode:
        case Model.STATISTICAL:
            return monte_carlo_source(
                mc_E_stat_stratified, stream, gauge, n, substreams=config.substreams
            )

        case Model.DYNAMICAL:
            return monte_carlo_source(
                mc_E_dyn,
                stream,
                gauge,
                n,
                family=config.family,
                lambda0=config.lambda0,
                condition_on=config.conditioning,
                substreams=config.substreams,
            )

        case Model.BELL_LOCAL:
            return bell_local_source(stream, gauge, n, substreams=config.substreams)


def cmd_estimate(config: RunConfig) -> list[Row]:
    a, b = config.require_axes(2)
    gauge, n = config.gauge(), config.sample_count()

    analytic: float | None = None
    if config.estimator.analytic:
        match config.mode:
            case Model.STATISTICAL:
                analytic = analytic_E_stat(gauge, a, b)

            case Model.DYNAMICAL:
                analytic = analytic_E_dyn(gauge, a, b)

    row = {
        "model": config.mode,
        "L": config.L,
        "axes": config.axes,
        "analytic_E": analytic,
        "mc_E": None,
        "std_error": None,
        "n": None,
        "f": None,
        "seed": config.seed,
    }

    if config.estimator.monte_carlo:
        stream = config.stream()

        match config.mode:
            case Model.STATISTICAL:
                estimate = mc_E_stat_stratified(stream, gauge, a, b, n, config.substreams)

            case Model.DYNAMICAL:
                estimate = mc_E_dyn(
                    stream,
                    gauge,
                    a,
                    b,
                    n,
                    config.family,
                    config.lambda0,
                    config.conditioning,
                    config.substreams,
                )

            case Model.BELL_LOCAL:
                estimate = bell_local_E(stream, None, a, b, n, gauge, config.substreams)

        row |= {
            "mc_E": estimate.mean,
            "std_error": estimate.std_error,
            "n": estimate.n_total,
            "f": estimate.click_fraction,
        }

    if config.mode is Model.STATISTICAL and config.eps is not None:
        expected_conditional, expected_full = analytic_E_ring(gauge, a, b, config.eps)
        row |= {
            "eps": config.eps,
            "analytic_ring_conditional": expected_conditional,
            "analytic_ring_full": expected_full,
        }

        if config.estimator.monte_carlo:
            conditional, full = mc_E_stat_ring(
                config.stream(1), gauge, a, b, config.eps, n, config.substreams
            )
            row |= {
                "ring_conditional": conditional.mean,
                "ring_conditional_std_error": conditional.std_error,
                "ring_full": full.mean,
                "ring_full_std_error": full.std_error,
                "ring_f": full.click_fraction,
            }

    logger.info("Estimated pair expectation", model=config.mode.value, L=config.L, mc_E=row["mc_E"])

    return [frozendict(row)]


def _chsh_row(kind: str, result: ChshResult) -> Row:
    ab, ab_prime, a_prime_b, a_prime_b_prime = result.expectations

    return frozendict(
        kind=kind,
        a=result.settings.a.theta,
        b=result.settings.b.theta,
        a_prime=result.settings.a_prime.theta,
        b_prime=result.settings.b_prime.theta,
        E_ab=ab,
        E_ab_prime=ab_prime,
        E_a_prime_b=a_prime_b,
        E_a_prime_b_prime=a_prime_b_prime,
        C=result.C,
        std_error=result.std_error,
        violates_bound=result.violates_bound,
    )


def cmd_chsh(config: RunConfig) -> list[Row]:
    settings = ChshSettings(*config.require_axes(4))
    gauge = config.gauge()
    rows = []

    if config.estimator.analytic and config.mode is not Model.BELL_LOCAL:
        rows.append(_chsh_row("analytic", chsh(analytic_source(gauge), settings, gauge)))

    if config.estimator.monte_carlo:
        rows.append(_chsh_row("mc", chsh(_estimate_source(config, gauge), settings, gauge)))

        if config.mode is Model.STATISTICAL and config.eps is not None:
            conditional, full = ring_chsh(
                config.stream(1), gauge, settings, config.eps, config.sample_count(), config.substreams
            )
            rows += [_chsh_row("ring-conditional", conditional), _chsh_row("ring-full", full)]

    for row in rows:
        logger.info("CHSH value", kind=row["kind"], C=row["C"], violates_bound=row["violates_bound"])

    return rows


def cmd_scan(config: RunConfig) -> list[Row]:
    gauge = config.gauge()

    use_analytic = config.estimator is not Estimator.MC and config.mode is not Model.BELL_LOCAL
    source = analytic_source(gauge) if use_analytic else _estimate_source(config, gauge)

    result = chsh_scan(source, gauge, config.grid or DEFAULT_SCAN_RESOLUTION)

    return [_chsh_row("argmax", result.best)] + [
        frozendict(kind="grid", d_ab=d_ab, d_a_prime_b=d_a_prime_b, d_b_prime_a_prime=d_b_prime, C=value)
        for d_ab, d_a_prime_b, d_b_prime, value in result.rows()
    ]


def cmd_density(config: RunConfig) -> list[Row]:
    if config.J0 is None or config.Jz0 is None:
        raise ConfigurationError("density needs both --J0 and --Jz0")

    report = density_histogram_check(
        config.stream(),
        config.J0,
        config.Jz0,
        config.sample_count(),
        config.bins,
        config.edge_exclusion,
        config.substreams,
    )

    summary = frozendict(
        kind="summary",
        l1=report.l1,
        edge_exclusion=report.edge_exclusion,
        observed_min=report.observed_range[0],
        observed_max=report.observed_range[1],
    )

    return [summary] + [
        frozendict(kind="bin", bin_low=low, bin_high=high, empirical=empirical, predicted=predicted)
        for low, high, empirical, predicted in report.rows()
    ]


def _witness_columns(config: RunConfig, index: int, delta: float) -> dict:
    stream, n = config.stream(index), config.sample_count()

    overlap = hemisphere_overlap_mc(stream.substream(0), delta, n, config.substreams)
    columns = {
        "overlap_mc": overlap.mean,
        "overlap_mc_std_error": overlap.std_error,
        "indicator_gap_sigmas": indicator_gap_sigmas(overlap, delta),
    }

    for offset, witness in enumerate(Witness, start=1):
        result = witness_check(stream.substream(offset), witness, delta, n, config.substreams)
        columns |= {
            f"{witness.value}_mean": result.estimate.mean,
            f"{witness.value}_std_error": result.estimate.std_error,
            f"{witness.value}_out_of_range": result.out_of_range_fraction,
            f"{witness.value}_domain_out_of_range": result.domain_out_of_range_fraction,
        }

    return columns


def cmd_appendix_b(config: RunConfig) -> list[Row]:
    """Overlap against cos^2 over a delta grid; MC witness columns only when --samples is given."""
    grid = config.grid or DEFAULT_DELTA_GRID

    if grid < 2:
        raise ConfigurationError(f"delta grid needs at least 2 points, got {grid}")

    report = contradiction_gap(np.linspace(0.0, math.pi, grid))

    rows: list[Row] = [frozendict(kind="argmax", delta=report.argmax, gap=report.max_gap)]

    for index, (delta, overlap, model, gap) in enumerate(report.rows()):
        row = {"kind": "delta", "delta": delta, "overlap": overlap, "model": model, "gap": gap}

        if config.samples is not None:
            row |= _witness_columns(config, index, delta)

        rows.append(frozendict(row))

    logger.info("Contradiction gap", argmax=report.argmax, max_gap=report.max_gap)

    return rows


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=[m.value for m in Model], default=Model.STATISTICAL.value)
    common.add_argument("--L", default="1/2", help='readout scale, "p/2" or decimal')
    common.add_argument("--axes", help='comma-separated angles, e.g. "0,pi/4" or "0,45deg"')
    common.add_argument("--eps", help="finite ring half-width (statistical model)")
    common.add_argument("--samples", help='Monte Carlo count, "1e6" style accepted')
    common.add_argument("--seed", help=f"falls back to ${SEED_VARIABLE}, then 0")
    common.add_argument("--substreams", default="1")
    common.add_argument("--family", choices=[f.value for f in Family], default=Family.MIXTURE.value)
    common.add_argument("--lambda0", default=str(DEFAULT_LAMBDA0))
    common.add_argument("--conditioning", choices=[c.value for c in ConditionOn], default=ConditionOn.A.value)
    common.add_argument("--estimator", choices=[e.value for e in Estimator], default=Estimator.BOTH.value)
    common.add_argument("--grid", help="scan resolution or delta grid size")
    common.add_argument("--J0")
    common.add_argument("--Jz0")
    common.add_argument("--bins", default=str(DEFAULT_BINS))
    common.add_argument("--edge-exclusion", dest="edge_exclusion", help="angle excluded at each support edge")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    common.add_argument("--output", help='result file, "-" for stdout')
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="bellphase",
        description="Classical angular-momentum ensembles against the Bell-CHSH bound",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("estimate", "pair expectation E(a, b)"),
        ("chsh", "CHSH value for four axes"),
        ("scan", "maximize CHSH over an axis grid"),
        ("density", "fixed-Jz density histogram check"),
        ("appendix-b", "hemisphere overlap against cos^2(delta/2)"),
    ):
        commands.add_parser(name, parents=[common], help=help_text)

    return parser


def configure_logging(verbose: bool) -> None:
    structlog.configure(
        wrapper_class=structlog.make_filtering_bound_logger(logging.DEBUG if verbose else logging.INFO),
        # resolved per call so a swapped sys.stderr is honoured
        logger_factory=lambda *_: structlog.PrintLogger(sys.stderr),
    )


def dispatch(config: RunConfig) -> list[Row]:
    match config.command:
        case "estimate":
            return cmd_estimate(config)

        case "chsh":
            return cmd_chsh(config)

        case "scan":
            return cmd_scan(config)

        case "density":
            return cmd_density(config)

        case "appendix-b":
            return cmd_appendix_b(config)

        case _:
            raise ConfigurationError(f"unknown command {config.command!r}")


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = RunConfig.from_args(args)
        rows = dispatch(config)

        # rendered in full before anything touches the output
        write_atomic(config.output, render(config.to_record(), rows, config.output_format))

    except BellphaseError as exc:
        logger.error("Run failed", error=str(exc), kind=type(exc).__name__)
        print(f"bellphase: error: {exc}", file=sys.stderr)

        return exc.exit_code

    except AssertionError as exc:
        logger.error("Invariant breached", error=str(exc))
        print(f"bellphase: invariant breached: {exc}", file=sys.stderr)

        return ContractViolation.exit_code

    return 0
