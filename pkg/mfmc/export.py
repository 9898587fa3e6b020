"""
CSV writers. Floats go out as Python's shortest round-trip repr, so files are
locale-independent and byte-stable for identical inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, TextIO

from .particle_oracle import ComparisonReport, PbsResult
from .state_space import Cir, Trajectory

RUN_HEADER = ("k", "t", "z_obs", "z_out")
CIR_HEADER = ("i", "t", "g")
PBS_HEADER = RUN_HEADER + ("seed", "particles", "partitions")
SUMMARY_HEADER = ("value", "Pe", "peak_z", "peak_k", "equilibrium_gain")
RESIDUAL_HEADER = ("k", "residual")


@dataclass(frozen=True)
class SweepRow:
    value: str                  # as written in the sweep file
    pe: float
    peak_z: float
    peak_k: int
    equilibrium_gain: float


def fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory(stream: TextIO, traj: Trajectory) -> None:
    writer = _writer(stream, RUN_HEADER)
    for k in range(traj.K + 1):
        writer.writerow((k, fmt(k * traj.dt), fmt(traj.z_obs[k]), fmt(traj.z_out[k])))


def write_cir(stream: TextIO, response: Cir) -> None:
    writer = _writer(stream, CIR_HEADER)
    for i, g in enumerate(response.g):
        writer.writerow((i, fmt(i * response.dt), fmt(g)))


def write_pbs(stream: TextIO, result: PbsResult) -> None:
    """Counts are integers; z_obs is the bound count, z_out the cumulative flow-out."""
    writer = _writer(stream, PBS_HEADER)
    for k in range(result.K + 1):
        writer.writerow(
            (
                k,
                fmt(k * result.dt),
                int(result.bound_count[k]),
                int(result.out_count[k]),
                result.seed,
                result.particles,
                result.partitions,
            )
        )


def write_states(stream: TextIO, traj: Trajectory) -> None:
    """Snapshots of x at traj.x_steps, one column per stored state."""
    N = traj.x.shape[1]
    writer = _writer(stream, ("k", "t") + tuple(f"x_{i}" for i in range(1, N + 1)))
    for k, x in zip(traj.x_steps, traj.x):
        writer.writerow([int(k), fmt(k * traj.dt)] + [fmt(v) for v in x])


def write_residuals(stream: TextIO, report: ComparisonReport) -> None:
    writer = _writer(stream, RESIDUAL_HEADER)
    for k, res in enumerate(report.residuals):
        writer.writerow((k, fmt(res)))


def write_sweep_summary(stream: TextIO, rows: Iterable[SweepRow]) -> None:
    writer = _writer(stream, SUMMARY_HEADER)
    for row in rows:
        writer.writerow(
            (
                row.value,
                # 12 significant digits absorb the rounding of v*L/D.
                f"{row.pe:.12g}",
                fmt(row.peak_z),
                row.peak_k,
                fmt(row.equilibrium_gain),
            )
        )


def _writer(stream: TextIO, header):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    return writer
