"""
Discrete-time state-space propagation of the channel.

    x[k]     = Q x[k-1] + b u[k-1]
    z_obs[k] = h^T x[k]
    z_out[k] = z_out[k-1] + psi^T x[k-1]

x holds expected molecule counts (reals). Everything is iterated sparse
mat-vecs; no dense powers of Q are ever formed here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import splu

from .errors import ConfigError, DimensionMismatch, NoConvergence, SingularSystem
from .markov_kernel import TransitionModel

log = logging.getLogger(__name__)

NEUMANN_PATIENCE = 100


@dataclass(frozen=True, eq=False)
class Trajectory:
    z_obs: np.ndarray           # (K+1,)
    z_out: np.ndarray           # (K+1,) cumulative flow-out
    x_total: np.ndarray         # (K+1,) sum of x[k]
    x: np.ndarray               # (snapshots, N), every `stride` steps from k = 0
    x_steps: np.ndarray         # step index of each snapshot
    u: np.ndarray               # (K,) input schedule
    dt: float = 1.0

    @property
    def K(self) -> int:
        return len(self.z_obs) - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    def injected(self) -> np.ndarray:
        """Total input released before each step k, sum_{j<k} u[j]."""
        return np.concatenate(([0.0], np.cumsum(self.u)))

    def peak(self) -> Tuple[int, float]:
        return peak(self.z_obs)


@dataclass(frozen=True, eq=False)
class Cir:
    g: np.ndarray               # g[i] = h^T Q^i b, i = 0..K
    dt: float = 1.0

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.g)) * self.dt

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.g)

    def peak(self) -> Tuple[int, float]:
        return peak(self.g)


def peak(values: np.ndarray) -> Tuple[int, float]:
    """Index and value of the first global maximum."""
    if len(values) == 0:
        raise ValueError("peak of an empty sequence")
    k = int(np.argmax(values))
    return k, float(values[k])


def propagate(
    model: TransitionModel,
    x0: Sequence[float],
    u: Sequence[float],
    K: Optional[int] = None,
    stride: int = 1,
) -> Trajectory:
    """Run the recurrence for K = len(u) steps, snapshotting x every `stride` steps."""
    x = np.array(x0, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    if K is None:
        K = len(u)
    if x.shape != (model.N,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, expected ({model.N},)")
    if len(u) != K:
        raise DimensionMismatch(f"input schedule has {len(u)} entries, expected K = {K}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}", key="stride")
    if np.any(u < 0) or np.any(x < 0):
        raise ConfigError("inputs and initial counts must be non-negative", key="u0")

    Q, b, h, psi = model.Q, model.b, model.h, model.psi
    z_obs = np.empty(K + 1)
    z_out = np.empty(K + 1)
    x_total = np.empty(K + 1)
    snaps = [x.copy()]

    z_obs[0] = h @ x
    z_out[0] = 0.0
    x_total[0] = x.sum()
    for k in range(1, K + 1):
        leaving = psi @ x
        x = Q @ x
        if u[k - 1]:
            x += b * u[k - 1]
        z_out[k] = z_out[k - 1] + leaving
        z_obs[k] = h @ x
        x_total[k] = x.sum()
        if k % stride == 0:
            snaps.append(x.copy())

    return Trajectory(
        z_obs=z_obs,
        z_out=z_out,
        x_total=x_total,
        x=np.vstack(snaps),
        x_steps=np.arange(0, K + 1, stride),
        u=u,
        dt=model.dt,
    )


def cir(model: TransitionModel, K: int) -> Cir:
    if K < 0:
        raise ValueError("K must be >= 0")
    g = np.empty(K + 1)
    w = model.b.astype(float)
    g[0] = model.h @ w
    for i in range(1, K + 1):
        w = model.Q @ w
        g[i] = model.h @ w
    return Cir(g=g, dt=model.dt)


def pulse_response(model: TransitionModel, u0: float, K: int, stride: int = 1) -> Trajectory:
    """u = u0 * delta[k]; z_obs[k] = g[k-1] * u0 for k >= 1."""
    _check_release(u0)
    u = np.zeros(K)
    if K > 0:
        u[0] = u0
    return propagate(model, np.zeros(model.N), u, K, stride=stride)


def continuous_response(model: TransitionModel, u0: float, K: int, stride: int = 1) -> Trajectory:
    """u[k] = u0 for every k; z_obs[k] = (sum_{i<k} g[i]) * u0."""
    _check_release(u0)
    return propagate(model, np.zeros(model.N), np.full(K, float(u0)), K, stride=stride)


def convolve_response(response: Cir, u: Sequence[float]) -> np.ndarray:
    """SISO observation from a CIR with x0 = 0: z[k] = sum_{i<k} g[i] u[k-i-1]."""
    u = np.asarray(u, dtype=float)
    K = len(u)
    if len(response.g) < K:
        raise DimensionMismatch(f"CIR has {len(response.g)} taps, need at least {K}")
    z = np.zeros(K + 1)
    if K:
        z[1:] = np.convolve(response.g[:K], u)[:K]
    return z


# ------------------------------------------------------------------
# Equilibrium
# ------------------------------------------------------------------


def equilibrium_gain(model: TransitionModel, tol: float = 1e-9) -> float:
    """
    h^T (I - Q)^{-1} b by a sparse LU solve.

    Only the states reachable from b enter the solve. An unreachable
    observation gives exactly 0; a closed, non-leaking class reachable from b
    (no flow, or a bound state that never unbinds) surfaces as SingularSystem.
    `tol` bounds the relative residual of the solve.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be > 0, got {tol!r}", key="tol")
    reach = _reachable_from_input(model)
    Q_rr = model.Q[reach][:, reach]
    A = (sparse.identity(len(reach), format="csc") - Q_rr).tocsc()
    b_r = model.b[reach]
    try:
        lu = splu(A)
        y = lu.solve(b_r)
    except RuntimeError as e:
        raise SingularSystem(f"I - Q is singular on the reachable states: {e}") from e

    if not np.all(np.isfinite(y)):
        raise SingularSystem("I - Q solve produced non-finite values")
    residual = float(np.abs(A @ y - b_r).max())
    scale = max(1.0, float(np.abs(y).max()))
    if residual > tol * scale:
        raise SingularSystem(f"I - Q is numerically singular (residual {residual:.3g})")

    # An observed state outside the reachable set contributes exactly 0.
    gain = float(model.h[reach] @ y)
    log.info("Equilibrium gain %.12g over %d reachable states", gain, len(reach))
    return gain


def neumann_gain(
    model: TransitionModel,
    tol: float = 1e-13,
    max_steps: int = 10_000_000,
    patience: int = NEUMANN_PATIENCE,
) -> float:
    """
    Truncated Neumann sum of the CIR, the cross-check for equilibrium_gain.

    Stops once `patience` consecutive increments are below tol * (running
    sum); an empty running sum never counts, so the wait for the first arrival
    at the receiver is not mistaken for convergence.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be > 0, got {tol!r}", key="tol")
    reach = _reachable_from_input(model)
    if not np.any(model.h[reach]):
        return 0.0

    w = model.b.astype(float)
    total = 0.0
    quiet = 0
    for step in range(max_steps):
        g = float(model.h @ w)
        total += g
        if total > 0.0 and g < tol * total:
            quiet += 1
            if quiet >= patience:
                log.debug("Neumann sum settled after %d terms: %.15g", step + 1, total)
                return total
        else:
            quiet = 0
        w = model.Q @ w

    log.warning("Neumann sum truncated at %d terms", max_steps)
    raise NoConvergence(
        f"Neumann series did not settle within {max_steps} terms",
        estimate=total,
        iterations=max_steps,
    )


def _reachable_from_input(model: TransitionModel) -> np.ndarray:
    # csgraph reads M[i, j] as an edge i -> j; Q[i, j] is a move j -> i.
    graph = model.Q.T.tocsr()
    seen = set()
    for source in np.flatnonzero(model.b):
        order = breadth_first_order(graph, int(source), directed=True, return_predecessors=False)
        seen.update(int(i) for i in order)
    return np.array(sorted(seen), dtype=int)


def _check_release(u0: float) -> None:
    if not u0 >= 0:
        raise ConfigError(f"u0 must be >= 0, got {u0!r}", key="u0")
