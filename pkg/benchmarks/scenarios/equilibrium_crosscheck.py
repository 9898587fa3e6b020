"""
Scenario: equilibrium_crosscheck

The sparse-LU equilibrium gain against a truncated Neumann sum of the CIR
on the reference channel at both flow speeds, plus the CLI's steady-state
figure against the in-process solve.

Expected:
  relative_gap_v10     <= 1e-8
  relative_gap_v60     <= 1e-8
  cli_gap              <= 1e-10
"""

from mfmc.state_space import equilibrium_gain, neumann_gain

DESCRIPTION = "splu gain vs Neumann series on the reference channel (Pe = 60, 360)"

EXPECTED = {
    "relative_gap_v10": (0.0, 1e-8),
    "relative_gap_v60": (0.0, 1e-8),
    "cli_gap": (0.0, 1e-10),
}

SCENARIO = "configs/continuous_r100.scn"


def run(h):
    gains = {}
    for speed in ("10", "60"):
        _, model = h.load(SCENARIO, f"v_um_s={speed}")
        direct = equilibrium_gain(model)
        series = neumann_gain(model, tol=1e-13)
        gains[speed] = direct
        h.metric(f"relative_gap_v{speed}", abs(series - direct) / direct)

    cli = h.equilibrium(SCENARIO)
    h.metric("cli_gap", abs(cli["equilibrium_gain"] - gains["10"]) / gains["10"])
