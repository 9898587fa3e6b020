"""
Scenario: stochasticity

1000 random valid configurations. Every column of [Q; psi^T] must sum to 1
and every entry must be non-negative. A subset is propagated with random
release schedules to check that mass is conserved along the trajectory.

Expected:
  max_column_residual        <= 1e-12
  max_relative_mass_defect   <= 1e-9
  negative_entries            0
"""

import numpy as np

from mfmc.channel_config import ChannelConfig
from mfmc.cli import build_model
from mfmc.state_space import propagate

DESCRIPTION = "1000 random configurations: column sums and mass conservation"

EXPECTED = {
    "max_column_residual": (0.0, 1e-12),
    "max_relative_mass_defect": (0.0, 1e-9),
    "negative_entries": (0.0, 0.0),
}

CONFIGS = 1000
PROPAGATED = 50
K = 1000


def _random_config(rng: np.random.Generator) -> ChannelConfig:
    p_diff = rng.uniform(0, 0.3)
    p_flow = rng.uniform(0, 1 - 2 * p_diff)
    N = int(rng.integers(4, 120))
    return ChannelConfig(
        D=p_diff,
        v=p_flow,
        k_on=rng.uniform(0, 1 - 2 * p_diff - p_flow),
        k_off=rng.uniform(0, 1),
        c_p=1.0,
        dx=1.0,
        dt=1.0,
        N=N,
        r=int(rng.integers(2, N - 1)),
    )


def run(h):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    worst_defect = 0.0
    negatives = 0

    for i in range(CONFIGS):
        model = build_model(_random_config(rng))
        worst = max(worst, float(model.column_residuals().max()))
        negatives += int(np.count_nonzero(model.Q.data < 0)) + int(np.count_nonzero(model.psi < 0))

        if i < PROPAGATED:
            u = rng.uniform(0, 1e4, size=K)
            x0 = rng.uniform(0, 1e3, size=model.N)
            traj = propagate(model, x0, u)
            mass = traj.x_total + traj.z_out
            expected = x0.sum() + traj.injected()
            defect = np.abs(mass - expected) / np.maximum(expected, 1.0)
            worst_defect = max(worst_defect, float(defect.max()))

    h.metric("max_column_residual", worst)
    h.metric("max_relative_mass_defect", worst_defect)
    h.metric("negative_entries", negatives)
