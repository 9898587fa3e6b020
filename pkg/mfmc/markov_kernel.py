"""
Transition model of the one-dimensional channel chain.

States are stored s_1..s_{N-1} (free) then s_N (bound), so Q is tridiagonal
among the free states plus the (N, r) / (r, N) receiver coupling. The flow-out
state is never stored; it lives only in psi.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import splu

from .channel_config import ElementaryProbabilities, ValidatedConfig
from .errors import ConfigError, DimensionMismatch, NoConvergence, NumericalError

log = logging.getLogger(__name__)

COLUMN_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionModel:
    Q: sparse.csr_matrix
    psi: np.ndarray
    b: np.ndarray
    h: np.ndarray
    N: int
    r: Optional[int] = None                         # 1-based receiver index; None for hand-built models
    probabilities: Optional[ElementaryProbabilities] = None
    dt: float = 1.0                                 # seconds per step, for time axes

    def __post_init__(self):
        n = self.Q.shape[0]
        if self.Q.shape != (n, n) or n != self.N:
            raise DimensionMismatch(f"Q has shape {self.Q.shape}, expected ({self.N}, {self.N})")
        for name in ("psi", "b", "h"):
            vec = getattr(self, name)
            if vec.shape != (n,):
                raise DimensionMismatch(f"{name} has shape {vec.shape}, expected ({n},)")

    @classmethod
    def from_dense(cls, Q, psi, b, h, dt: float = 1.0) -> "TransitionModel":
        """Wrap hand-written arrays, mostly for toy systems and tests."""
        Q = np.asarray(Q, dtype=float)
        return cls(
            Q=sparse.csr_matrix(Q),
            psi=np.asarray(psi, dtype=float),
            b=np.asarray(b, dtype=float),
            h=np.asarray(h, dtype=float),
            N=Q.shape[0],
            dt=dt,
        )

    @property
    def nnz(self) -> int:
        return int(self.Q.nnz)

    def column_residuals(self) -> np.ndarray:
        """|sum_i Q[i, j] + psi[j] - 1| per column."""
        colsum = np.asarray(self.Q.sum(axis=0)).ravel()
        return np.abs(colsum + self.psi - 1.0)

    def dense(self) -> np.ndarray:
        return self.Q.toarray()


def build_transition_model(cfg: ValidatedConfig, ep: ElementaryProbabilities) -> TransitionModel:
    """
    Assemble Q, psi, b, h.

    Free states hop downstream with p_diff + p_flow and upstream with p_diff;
    s_{N-1} leaks p_diff + p_flow into flow-out. The receiver s_r binds into s_N
    with p_bind and s_N unbinds back with p_unbind. Diagonals are the column
    complements.
    """
    N = cfg.N
    r0 = cfg.r - 1
    bound = N - 1
    last_free = N - 2
    down = ep.hop_downstream()

    rows, cols, vals = [], [], []

    def put(i: int, j: int, value: float) -> None:
        rows.append(i)
        cols.append(j)
        vals.append(value)

    for j in range(N - 1):
        if j == 0:
            stay = 1.0 - down
        elif j == r0:
            stay = ep.receiver_self()
        else:
            stay = ep.interior_self()
        put(j, j, stay)
        if j > 0:
            put(j - 1, j, ep.p_diff)
        if j < last_free:
            put(j + 1, j, down)
        if j == r0:
            put(bound, j, ep.p_bind)

    put(r0, bound, ep.p_unbind)
    put(bound, bound, ep.bound_self())

    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))
    Q.eliminate_zeros()
    Q.sort_indices()

    psi = np.zeros(N)
    psi[last_free] = down
    b = np.zeros(N)
    b[0] = 1.0
    h = np.zeros(N)
    h[bound] = 1.0

    model = TransitionModel(Q=Q, psi=psi, b=b, h=h, N=N, r=cfg.r, probabilities=ep, dt=cfg.dt)
    log.info(
        "Built transition model N=%d r=%d nnz=%d max column residual=%.3g",
        N,
        cfg.r,
        model.nnz,
        float(model.column_residuals().max()),
    )
    return model


def full_transition_matrix(model: TransitionModel) -> np.ndarray:
    """Dense (N+1)x(N+1) P with the absorbing flow-out state appended last."""
    N = model.N
    P = np.zeros((N + 1, N + 1))
    P[:N, :N] = model.dense()
    P[N, :N] = model.psi
    P[N, N] = 1.0
    return P


def check_conservation(model: TransitionModel, tol: float = COLUMN_SUM_TOL) -> float:
    """
    Max column residual of [Q; psi^T]. Raises NumericalError if any column
    misses 1 by more than tol or any entry is negative.
    """
    if (model.Q.nnz and float(model.Q.data.min()) < 0.0) or float(model.psi.min()) < 0.0:
        raise NumericalError("transition model has negative entries")
    worst = float(model.column_residuals().max())
    if worst > tol:
        raise NumericalError(f"column sums of [Q; psi] deviate from 1 by {worst:.3g} > {tol:g}")
    return worst


@dataclass(frozen=True)
class SpectralBracket:
    """Certified interval lower <= rho(Q) <= upper."""

    lower: float
    upper: float
    iterations: int

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def spectral_bracket(model: TransitionModel, iters: int = 100_000, tol: float = 1e-10) -> SpectralBracket:
    """
    Power iteration on the resolvent R = (I - Q)^{-1} from the uniform positive vector.

    R shares the Perron vector of Q and has Perron root 1 / (1 - rho). For a
    positive iterate x the Collatz-Wielandt ratios (Rx)_i / x_i bracket that
    root, so 1 - x_i / (Rx)_i brackets rho(Q). Stops once the bracket is
    narrower than tol. An exactly singular I - Q means 1 is an eigenvalue,
    and with column sums <= 1 that makes rho(Q) = 1.

    The LU keeps the natural order and diagonal pivots: I - Q is a column
    diagonally dominant M-matrix, so both triangular solves add non-negative
    terms only and every component of Rx keeps its relative accuracy.
    """
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}", key="iters")
    if not tol > 0:
        raise ConfigError(f"tol must be > 0, got {tol!r}", key="tol")

    A = (sparse.identity(model.N, format="csc") - model.Q).tocsc()
    try:
        lu = splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.0)
    except RuntimeError:
        log.info("I - Q is exactly singular; rho(Q) = 1")
        return SpectralBracket(lower=1.0, upper=1.0, iterations=0)

    x = np.full(model.N, 1.0 / model.N)
    lower, upper = 0.0, 1.0
    for it in range(1, iters + 1):
        y = lu.solve(x)
        if not np.all(np.isfinite(y)) or float(y.min()) <= 0.0:
            raise NumericalError("resolvent iterate lost positivity; I - Q is numerically singular")
        ratios = x / y
        lower = max(0.0, 1.0 - float(ratios.max()))
        upper = 1.0 - float(ratios.min())
        if upper - lower < tol:
            log.debug("rho(Q) in [%.15g, %.15g] after %d iterations", lower, upper, it)
            return SpectralBracket(lower=lower, upper=upper, iterations=it)
        x = y / float(y.max())

    estimate = 0.5 * (lower + upper)
    log.warning("Power iteration hit %d iterations; rho(Q) in [%.15g, %.15g]", iters, lower, upper)
    raise NoConvergence(
        f"spectral bracket [{lower:.15g}, {upper:.15g}] still wider than {tol:g} after {iters} iterations",
        estimate=estimate,
        iterations=iters,
    )


def spectral_radius_estimate(model: TransitionModel, iters: int = 100_000, tol: float = 1e-10) -> float:
    """Midpoint of spectral_bracket; raises NoConvergence instead of returning an uncertified value."""
    return spectral_bracket(model, iters=iters, tol=tol).estimate


# ------------------------------------------------------------------
# Debug dump
# ------------------------------------------------------------------


def dump_model(model: TransitionModel, stream: TextIO) -> None:
    """
    Write Q, psi, b and h as coordinate triplets (1-based, column-major order).
    Values use 17 significant digits so golden files round-trip exactly.
    """
    coo = model.Q.tocoo()
    order = np.lexsort((coo.row, coo.col))
    stream.write("%%MatrixMarket matrix coordinate real general\n")
    stream.write(f"% Q N={model.N} r={model.r}\n")
    stream.write(f"{model.N} {model.N} {coo.nnz}\n")
    for k in order:
        stream.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {coo.data[k]:.17g}\n")
    for name in ("psi", "b", "h"):
        vec = getattr(model, name)
        nz = np.flatnonzero(vec)
        stream.write(f"% {name}\n")
        stream.write(f"{model.N} 1 {nz.size}\n")
        for i in nz:
            stream.write(f"{i + 1} 1 {vec[i]:.17g}\n")
