"""
Particle-based simulation (PBS) of the same chain the analytical model uses.

Every particle draws one uniform per step and walks its column of P through a
fixed outcome order: stay, then the off-diagonal moves by ascending row
(upstream, downstream, bind/unbind), then flow-out. Flowed-out particles are
retired at once. Particles are split into partitions, each with its own
deterministic stream derived from (seed, partition index), so a run is
reproducible for a fixed partition count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ScheduleMismatch
from .markov_kernel import TransitionModel, check_conservation
from .state_space import Trajectory

log = logging.getLogger(__name__)

RESIDUAL_EPS = 1e-12
SIGMA_BOUND = 3.0
_SEED_LIMIT = 2**64


@dataclass(frozen=True, eq=False)
class PbsConfig:
    model: TransitionModel
    particles: int                      # M, released per release event
    K: int
    seed: int
    schedule: np.ndarray                # (K,) integer releases per step
    x0: Optional[np.ndarray] = None     # (N,) integer initial occupancy
    partitions: int = 1
    stride: Optional[int] = None        # occupancy snapshot stride; None = no snapshots
    workers: Optional[int] = None

    def __post_init__(self):
        if int(self.particles) < 1:
            raise ConfigError(f"particles must be >= 1, got {self.particles}", key="particles")
        if self.K < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}", key="K")
        if not 0 <= int(self.seed) < _SEED_LIMIT:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}", key="seed")
        if self.partitions < 1:
            raise ConfigError(f"partitions must be >= 1, got {self.partitions}", key="partitions")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1", key="stride")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}", key="workers")
        schedule = np.asarray(self.schedule)
        if schedule.shape != (self.K,):
            raise ScheduleMismatch(f"schedule has shape {schedule.shape}, expected ({self.K},)")
        if np.any(schedule < 0) or np.any(schedule != np.round(schedule)):
            raise ConfigError("schedule must hold non-negative integers", key="u0")
        if self.x0 is not None:
            x0 = np.asarray(self.x0)
            if x0.shape != (self.model.N,) or np.any(x0 < 0) or np.any(x0 != np.round(x0)):
                raise ConfigError("x0 must be a non-negative integer N-vector", key="x0")

    @classmethod
    def pulse(cls, model: TransitionModel, particles: int, K: int, seed: int, **kwargs) -> "PbsConfig":
        schedule = np.zeros(K, dtype=np.int64)
        if K > 0:
            schedule[0] = particles
        return cls(model=model, particles=particles, K=K, seed=seed, schedule=schedule, **kwargs)

    @classmethod
    def continuous(cls, model: TransitionModel, particles: int, K: int, seed: int, **kwargs) -> "PbsConfig":
        schedule = np.full(K, particles, dtype=np.int64)
        return cls(model=model, particles=particles, K=K, seed=seed, schedule=schedule, **kwargs)


@dataclass(frozen=True, eq=False)
class PbsResult:
    bound_count: np.ndarray             # (K+1,) particles in observed states
    out_count: np.ndarray               # (K+1,) cumulative flowed-out particles
    transient_count: np.ndarray         # (K+1,) particles still in the chain
    released: np.ndarray                # (K,) schedule actually released
    initial: int                        # particles present at k = 0
    seed: int
    particles: int
    partitions: int
    occupancy: Optional[np.ndarray] = None       # (snapshots, N)
    occupancy_steps: Optional[np.ndarray] = None
    dt: float = 1.0

    @property
    def K(self) -> int:
        return len(self.bound_count) - 1

    def total_released(self) -> np.ndarray:
        """Particles introduced through step k (initial ones included)."""
        return self.initial + np.concatenate(([0], np.cumsum(self.released)))

    def conservation_defect(self) -> int:
        return int(np.abs(self.transient_count + self.out_count - self.total_released()).max())


@dataclass
class ComparisonReport:
    residuals: np.ndarray
    max_abs_residual: float
    within_fraction: float              # share of steps with |residual| <= 3
    steps: int

    def passes(self, threshold: float = 0.95) -> bool:
        return self.within_fraction >= threshold

    def summary(self) -> str:
        return (
            f"max |residual| = {self.max_abs_residual:.4g} | "
            f"within {SIGMA_BOUND:g} sigma: {self.within_fraction:.2%} of {self.steps} steps"
        )


@dataclass
class _PartitionCounts:
    bound: np.ndarray
    out: np.ndarray
    transient: np.ndarray
    occupancy: Optional[List[np.ndarray]]


def run_pbs(cfg: PbsConfig) -> PbsResult:
    model = cfg.model
    check_conservation(model)
    thresholds, targets = _outcome_tables(model)
    observed = model.h > 0

    schedule = np.asarray(cfg.schedule, dtype=np.int64)
    x0 = np.zeros(model.N, dtype=np.int64) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.int64)
    P = cfg.partitions
    release_split = _split(schedule, P)                 # (P, K)
    initial_split = _split(x0, P)                       # (P, N)
    root = np.random.SeedSequence(int(cfg.seed))

    def work(p: int) -> _PartitionCounts:
        stream = np.random.SeedSequence(root.entropy, spawn_key=(p,))
        rng = np.random.Generator(np.random.PCG64(stream))
        counts = _walk(
            rng,
            thresholds,
            targets,
            observed,
            initial_split[p],
            release_split[p],
            cfg.K,
            cfg.stride,
        )
        log.debug("PBS partition %d/%d done", p + 1, P)
        return counts

    if P == 1 or cfg.workers == 1:
        parts = [work(p) for p in range(P)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            parts = list(executor.map(work, range(P)))

    occupancy = None
    occupancy_steps = None
    if cfg.stride is not None:
        occupancy = np.sum([np.vstack(p.occupancy) for p in parts], axis=0)
        occupancy_steps = np.arange(0, cfg.K + 1, cfg.stride)

    result = PbsResult(
        bound_count=np.sum([p.bound for p in parts], axis=0),
        out_count=np.sum([p.out for p in parts], axis=0),
        transient_count=np.sum([p.transient for p in parts], axis=0),
        released=schedule,
        initial=int(x0.sum()),
        seed=int(cfg.seed),
        particles=int(cfg.particles),
        partitions=P,
        occupancy=occupancy,
        occupancy_steps=occupancy_steps,
        dt=model.dt,
    )
    log.info(
        "PBS run seed=%d particles=%d partitions=%d K=%d released=%d flowed out=%d",
        result.seed,
        result.particles,
        P,
        cfg.K,
        int(result.total_released()[-1]),
        int(result.out_count[-1]),
    )
    return result


def compare_to_model(result: PbsResult, traj: Trajectory) -> ComparisonReport:
    """
    Standardised residuals (empirical - expected) / sqrt(expected (1 - expected/total) + eps)
    of the observed count against the analytical trajectory, per step.
    """
    if result.K != traj.K:
        raise ScheduleMismatch(f"PBS has K = {result.K}, trajectory has K = {traj.K}")
    if not np.array_equal(result.released.astype(float), np.asarray(traj.u, dtype=float)):
        raise ScheduleMismatch("PBS release schedule differs from the trajectory input")
    if result.initial != round(float(traj.x_total[0])):
        raise ScheduleMismatch("PBS and trajectory start from different initial populations")

    expected = traj.z_obs
    total = result.total_released().astype(float)
    share = np.divide(expected, total, out=np.zeros_like(expected), where=total > 0)
    variance = np.clip(expected * (1.0 - share), 0.0, None) + RESIDUAL_EPS
    residuals = (result.bound_count - expected) / np.sqrt(variance)
    # Below float resolution there is nothing to compare.
    residuals[np.abs(result.bound_count - expected) < RESIDUAL_EPS] = 0.0

    within = float(np.mean(np.abs(residuals) <= SIGMA_BOUND))
    return ComparisonReport(
        residuals=residuals,
        max_abs_residual=float(np.abs(residuals).max()),
        within_fraction=within,
        steps=len(residuals),
    )


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _outcome_tables(model: TransitionModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-state cumulative thresholds (N, W-1) and targets (N, W).
    Target -1 is flow-out. Unused slots carry zero probability and target j.
    """
    N = model.N
    Qc = model.Q.tocsc()
    Qc.sort_indices()
    columns = []
    for j in range(N):
        rows = Qc.indices[Qc.indptr[j]:Qc.indptr[j + 1]]
        vals = Qc.data[Qc.indptr[j]:Qc.indptr[j + 1]]
        stay = float(vals[rows == j].sum())
        moves = [(int(i), float(p)) for i, p in zip(rows, vals) if i != j]
        columns.append([(j, stay)] + moves)

    width = max(len(c) for c in columns) + 1
    targets = np.empty((N, width), dtype=np.int64)
    probs = np.zeros((N, width))
    for j, outcomes in enumerate(columns):
        targets[j, :] = j
        for slot, (i, p) in enumerate(outcomes):
            targets[j, slot] = i
            probs[j, slot] = p
        targets[j, -1] = -1
        probs[j, -1] = model.psi[j]

    thresholds = np.cumsum(probs[:, :-1], axis=1)
    # Flow-out starts at exactly 1 - psi_j, so psi_j = 0 can never be drawn.
    thresholds[:, -1] = 1.0 - model.psi
    thresholds[:, :-1] = np.minimum(thresholds[:, :-1], thresholds[:, -1:])
    return thresholds, targets


def _walk(
    rng: np.random.Generator,
    thresholds: np.ndarray,
    targets: np.ndarray,
    observed: np.ndarray,
    initial: np.ndarray,
    releases: np.ndarray,
    K: int,
    stride: Optional[int],
) -> _PartitionCounts:
    N = len(initial)
    pos = np.repeat(np.arange(N, dtype=np.int64), initial)
    bound = np.zeros(K + 1, dtype=np.int64)
    out = np.zeros(K + 1, dtype=np.int64)
    transient = np.zeros(K + 1, dtype=np.int64)
    occupancy = [] if stride is not None else None

    def record(k: int) -> None:
        bound[k] = np.count_nonzero(observed[pos])
        transient[k] = pos.size
        if occupancy is not None and k % stride == 0:
            occupancy.append(np.bincount(pos, minlength=N))

    record(0)
    flowed = 0
    for k in range(1, K + 1):
        if pos.size:
            draws = rng.random(pos.size)
            outcome = np.count_nonzero(draws[:, None] >= thresholds[pos], axis=1)
            moved = targets[pos, outcome]
            alive = moved >= 0
            flowed += pos.size - int(np.count_nonzero(alive))
            pos = moved[alive]
        if releases[k - 1]:
            pos = np.concatenate((pos, np.zeros(int(releases[k - 1]), dtype=np.int64)))
        out[k] = flowed
        record(k)

    return _PartitionCounts(bound=bound, out=out, transient=transient, occupancy=occupancy)


def _split(counts: Sequence[int], parts: int) -> np.ndarray:
    """Split integer counts across partitions: floor share, remainder to the first ones."""
    counts = np.asarray(counts, dtype=np.int64)
    base, extra = np.divmod(counts, parts)
    index = np.arange(parts).reshape((parts,) + (1,) * counts.ndim)
    return base + (index < extra).astype(np.int64)
