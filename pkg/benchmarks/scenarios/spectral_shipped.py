"""
Scenario: spectral_shipped

Certified bracket of rho(Q) for every shipped scenario. Each channel leaks
through the outlet and unbinds, so the upper end of the bracket must stay
strictly below 1. A bracket that fails to close within the iteration cap
fails the scenario.

Expected:
  min_spectral_gap    > 0   (1 - max upper bound)
  max_rho_upper       < 1
  max_bracket_width   <= tolerance
"""

from benchmarks.harness import CONFIGS, REPO
from mfmc.markov_kernel import spectral_bracket

DESCRIPTION = "rho(Q) < 1 for every shipped scenario"

TOL = 1e-10

EXPECTED = {
    "min_spectral_gap": (1e-9, 1.0),
    "max_rho_upper": (1e-6, 1.0 - 1e-9),
    "max_bracket_width": (0.0, TOL),
    "scenarios_checked": (1.0, float("inf")),
}


def run(h):
    worst = 0.0
    widest = 0.0
    shipped = sorted(CONFIGS.glob("*.scn"))
    for path in shipped:
        _, model = h.load(str(path.relative_to(REPO)))
        bracket = spectral_bracket(model, tol=TOL)
        worst = max(worst, bracket.upper)
        widest = max(widest, bracket.width)
    h.metric("scenarios_checked", len(shipped))
    h.metric("max_rho_upper", worst)
    h.metric("max_bracket_width", widest)
    h.metric("min_spectral_gap", 1.0 - worst)
