"""
Scenario: small_instance

Exact-oracle checks on instances small enough to write out by hand:
the N = 6 channel against its hand-assembled matrix, and the two-state toy
chain whose spectral radius (0.8) and equilibrium gain (15/7) are known in
closed form. CIR taps are compared against dense matrix powers.

Expected:
  max_entry_error      ~0
  toy_gain_error       <= 1e-12
  toy_rho_error        <= 1e-9
  cir_power_error      <= 1e-14
"""

import numpy as np

from mfmc.channel_config import ChannelConfig
from mfmc.cli import build_model
from mfmc.markov_kernel import TransitionModel, spectral_radius_estimate
from mfmc.state_space import cir, equilibrium_gain

DESCRIPTION = "N = 6 hand-written matrix, two-state toy chain, CIR vs matrix powers"

EXPECTED = {
    "max_entry_error": (0.0, 1e-15),
    "toy_gain_error": (0.0, 1e-12),
    "toy_rho_error": (0.0, 1e-9),
    "cir_power_error": (0.0, 1e-14),
}

# p_diff = 0.1, p_flow = 0.05, p_bind = 0.2, p_unbind = 0.3, receiver at s3
HAND_Q = np.array(
    [
        [0.85, 0.10, 0.00, 0.00, 0.00, 0.00],
        [0.15, 0.75, 0.10, 0.00, 0.00, 0.00],
        [0.00, 0.15, 0.55, 0.10, 0.00, 0.30],
        [0.00, 0.00, 0.15, 0.75, 0.10, 0.00],
        [0.00, 0.00, 0.00, 0.15, 0.75, 0.00],
        [0.00, 0.00, 0.20, 0.00, 0.00, 0.70],
    ]
)


def run(h):
    small = build_model(ChannelConfig(D=0.1, v=0.05, k_on=0.2, k_off=0.3, c_p=1.0, dx=1.0, dt=1.0, N=6, r=3))
    h.metric("max_entry_error", np.abs(small.dense() - HAND_Q).max())

    toy = TransitionModel.from_dense([[0.5, 0.2], [0.3, 0.6]], psi=[0.2, 0.2], b=[1.0, 0.0], h=[0.0, 1.0])
    h.metric("toy_gain_error", abs(equilibrium_gain(toy) - 15 / 7))
    h.metric("toy_rho_error", abs(spectral_radius_estimate(toy, tol=1e-13) - 0.8))

    g = cir(small, 60).g
    Q = small.dense()
    w = small.b.astype(float)
    worst = 0.0
    for i in range(61):
        worst = max(worst, abs(g[i] - float(small.h @ w)))
        w = Q @ w
    h.metric("cir_power_error", worst)
