"""
mfmc command line.

    mfmc run SCENARIO [-o OUT]            expected trajectory  k,t,z_obs,z_out
    mfmc cir SCENARIO [-o OUT]            impulse response     i,t,g
    mfmc equilibrium SCENARIO             equilibrium gain and steady observation
    mfmc pbs SCENARIO [-o OUT]            particle simulation + comparison report
    mfmc sweep SWEEP OUTDIR               one CSV per point plus summary.csv
    mfmc spectral SCENARIO                certified bracket of rho(Q)
    mfmc dump SCENARIO [-o OUT]           coordinate dump of Q, psi, b, h
    mfmc history [--limit N]              recorded runs, newest first

Exit codes: 0 success, 2 validation, 3 I/O, 4 numerical.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, TextIO

from . import export, storage
from .channel_config import ChannelConfig, elementary_probabilities, peclet_number, validate_config
from .errors import ChannelError, ConfigError, DimensionMismatch, NumericalError, ScheduleMismatch
from .markov_kernel import TransitionModel, build_transition_model, dump_model, spectral_bracket
from .particle_oracle import PbsConfig, compare_to_model, run_pbs
from .scenario import Scenario, SweepPoint, load_scenario, load_sweep, parse_overrides
from .state_space import Trajectory, cir, continuous_response, equilibrium_gain, pulse_response

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

LOG_FORMAT = "%(asctime)s [mfmc] %(levelname)s %(message)s"


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        _configure_logging(args.verbose, args.log_file)
        return args.func(args)
    except (ConfigError, ScheduleMismatch, DimensionMismatch) as e:
        _report(e)
        return EXIT_VALIDATION
    except NumericalError as e:
        _report(e)
        return EXIT_NUMERICAL
    except OSError as e:
        _report(e)
        return EXIT_IO


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfmc",
        description="Discrete-time Markov model of a microfluidic molecular communication channel",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--log-file", type=Path, help="Mirror log output to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Expected pulse/continuous trajectory")
    _scenario_args(p)
    p.add_argument("--stride", type=int, default=1, help="Step stride of the --states snapshots")
    p.add_argument("--states", type=Path, help="Write x[k] snapshots (k,t,x_1..x_N) here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("cir", help="Channel impulse response g_i = h^T Q^i b")
    _scenario_args(p)
    p.set_defaults(func=cmd_cir)

    p = sub.add_parser("equilibrium", help="Equilibrium gain h^T (I - Q)^-1 b")
    _scenario_args(p, output=False)
    p.add_argument("--tol", type=float, default=1e-9, help="Relative residual bound of the solve")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("pbs", help="Particle-based simulation against the analytical model")
    _scenario_args(p)
    p.add_argument("--particles", type=int, help="Particles per release event (default: scenario)")
    p.add_argument("--seed", type=int, help="Unsigned 64-bit seed (default: scenario)")
    p.add_argument("--partitions", type=int, default=1, help="Independent particle partitions")
    p.add_argument("--workers", type=int, help="Threads running partitions")
    p.add_argument("--stride", type=int, help="Record occupancy every N steps")
    p.add_argument("--report", type=Path, help="Write per-step residuals here")
    p.set_defaults(func=cmd_pbs)

    p = sub.add_parser("sweep", help="Run every point of a sweep file")
    p.add_argument("sweep", type=Path)
    p.add_argument("output_dir", type=Path)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--workers", type=int, help="Threads running sweep points")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--record", action="store_true", help="Append this run to the ledger")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectral", help="Certified bracket of rho(Q)")
    _scenario_args(p, output=False)
    p.add_argument("--iters", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("dump", help="Coordinate dump of the transition model")
    _scenario_args(p, record=False)
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("history", help="Show recorded runs")
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--scenario", help="Only runs of this scenario")
    p.set_defaults(func=cmd_history)

    return parser


# ------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    model = build_model(scenario.cfg)
    traj = expected_trajectory(model, scenario, stride=args.stride if args.states is not None else None)
    with _output(args.output) as stream:
        export.write_trajectory(stream, traj)
    if args.states is not None:
        with open(args.states, "w", newline="", encoding="utf-8") as f:
            export.write_states(f, traj)
    k_peak, z_peak = traj.peak()
    log.info("%s: K=%d peak z_obs=%.6g at k=%d", scenario.name, scenario.K, z_peak, k_peak)
    if args.record:
        storage.record_run(
            "run",
            scenario.name,
            output_path=args.output,
            summary={"mode": scenario.mode, "u0": scenario.u0, "K": scenario.K, "peak_k": k_peak, "peak_z": z_peak},
        )
    return EXIT_OK


def cmd_cir(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    model = build_model(scenario.cfg)
    response = cir(model, scenario.K)
    with _output(args.output) as stream:
        export.write_cir(stream, response)
    if args.record:
        i_peak, g_peak = response.peak()
        storage.record_run(
            "cir",
            scenario.name,
            output_path=args.output,
            summary={"K": scenario.K, "peak_i": i_peak, "peak_g": g_peak, "sum_g": float(response.g.sum())},
        )
    return EXIT_OK


def cmd_equilibrium(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    model = build_model(scenario.cfg)
    gain = equilibrium_gain(model, tol=args.tol)
    steady = gain * scenario.u0
    print("equilibrium_gain,steady_state")
    print(f"{gain:.12g},{steady:.12g}")
    if args.record:
        storage.record_run("equilibrium", scenario.name, summary={"gain": gain, "u0": scenario.u0})
    return EXIT_OK


def cmd_pbs(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    particles = args.particles if args.particles is not None else scenario.pbs_particles()
    seed = args.seed if args.seed is not None else scenario.seed
    model = build_model(scenario.cfg)

    make = PbsConfig.pulse if scenario.mode == "pulse" else PbsConfig.continuous
    pbs_cfg = make(
        model,
        particles,
        scenario.K,
        seed,
        partitions=args.partitions,
        stride=args.stride,
        workers=args.workers,
    )
    result = run_pbs(pbs_cfg)
    traj = expected_trajectory(model, scenario, u0=particles)
    report = compare_to_model(result, traj)

    with _output(args.output) as stream:
        export.write_pbs(stream, result)
    if args.report is not None:
        with open(args.report, "w", newline="", encoding="utf-8") as f:
            export.write_residuals(f, report)
    print(f"{scenario.name}: {report.summary()}", file=sys.stderr)

    if args.record:
        storage.record_run(
            "pbs",
            scenario.name,
            output_path=args.output,
            seed=seed,
            particles=particles,
            partitions=args.partitions,
            summary={
                "K": scenario.K,
                "max_abs_residual": report.max_abs_residual,
                "within_fraction": report.within_fraction,
            },
        )
    return EXIT_OK


@dataclass
class _PointResult:
    point: SweepPoint
    trajectory: Trajectory
    row: export.SweepRow


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.workers is not None and args.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {args.workers}", key="workers")
    if not args.tol > 0:
        raise ConfigError(f"tol must be > 0, got {args.tol!r}", key="tol")
    spec = load_sweep(args.sweep, parse_overrides(args.overrides))
    points = spec.points()

    def evaluate(point: SweepPoint) -> _PointResult:
        scenario = point.scenario
        model = build_model(scenario.cfg)
        traj = expected_trajectory(model, scenario)
        k_peak, z_peak = traj.peak()
        row = export.SweepRow(
            value=point.label,
            pe=peclet_number(scenario.cfg),
            peak_z=z_peak,
            peak_k=k_peak,
            equilibrium_gain=equilibrium_gain(model, tol=args.tol),
        )
        log.info("Sweep point %s done (peak k=%d)", scenario.name, k_peak)
        return _PointResult(point=point, trajectory=traj, row=row)

    # map() yields in submission order, so the summary keeps the file's order.
    with ThreadPoolExecutor(max_workers=args.workers) as executor:
        results = list(executor.map(evaluate, points))

    args.output_dir.mkdir(parents=True, exist_ok=True)
    for res in results:
        path = args.output_dir / f"{spec.axis}_{res.point.label}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            export.write_trajectory(f, res.trajectory)
    summary_path = args.output_dir / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        export.write_sweep_summary(f, [res.row for res in results])

    if args.record:
        storage.record_run(
            "sweep",
            spec.base.name,
            output_path=summary_path,
            summary={"axis": spec.axis, "values": list(spec.labels)},
        )
    return EXIT_OK


def cmd_spectral(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    model = build_model(scenario.cfg)
    bracket = spectral_bracket(model, iters=args.iters, tol=args.tol)
    print("spectral_radius,lower,upper")
    print(f"{bracket.estimate:.12g},{bracket.lower!r},{bracket.upper!r}")
    if args.record:
        storage.record_run(
            "spectral",
            scenario.name,
            summary={"rho": bracket.estimate, "lower": bracket.lower, "upper": bracket.upper},
        )
    return EXIT_OK


def cmd_dump(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, parse_overrides(args.overrides))
    model = build_model(scenario.cfg)
    with _output(args.output) as stream:
        dump_model(model, stream)
    return EXIT_OK


def cmd_history(args: argparse.Namespace) -> int:
    runs = storage.list_runs(limit=args.limit, scenario=args.scenario)
    if not runs:
        print("(no recorded runs)", file=sys.stderr)
        return EXIT_OK
    for run in runs:
        seed = "-" if run.seed is None else str(run.seed)
        print(
            f"#{run.id:<5} {run.created_at}  {run.command:<12} {run.scenario:<30} "
            f"seed={seed} hash={run.output_hash or '-'}"
        )
    return EXIT_OK


# ------------------------------------------------------------------
# Shared helpers
# ------------------------------------------------------------------


def build_model(cfg: ChannelConfig) -> TransitionModel:
    validated = validate_config(cfg)
    return build_transition_model(validated, elementary_probabilities(validated))


def expected_trajectory(
    model: TransitionModel,
    scenario: Scenario,
    u0: Optional[float] = None,
    stride: Optional[int] = None,
) -> Trajectory:
    """Analytical trajectory of the scenario. stride=None keeps only the first and last state."""
    release = scenario.u0 if u0 is None else u0
    if stride is None:
        stride = max(scenario.K, 1)
    if scenario.mode == "pulse":
        return pulse_response(model, release, scenario.K, stride=stride)
    return continuous_response(model, release, scenario.K, stride=stride)


def _scenario_args(p: argparse.ArgumentParser, output: bool = True, record: bool = True) -> None:
    p.add_argument("scenario", type=Path, help="Scenario file (key = value)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a key after the file is read; v_um_s, dx_um, D_um2_s accepted",
    )
    if output:
        p.add_argument("-o", "--output", type=Path, help="Output file (default: stdout)")
    if record:
        p.add_argument("--record", action="store_true", help="Append this run to the ledger")


@contextlib.contextmanager
def _output(path: Optional[Path]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        yield f


def _configure_logging(verbose: bool, log_file: Optional[Path]) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _report(e: Exception) -> None:
    message = str(e)
    key = getattr(e, "key", None)
    if isinstance(e, ChannelError) and key and key not in message:
        message = f"{message} (key: {key})"
    log.debug("Command failed", exc_info=True)
    print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
