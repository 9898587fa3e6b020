"""
Scenario: pbs_agreement

1e5 simulated particles released as a pulse on the near-receiver channel.
The bound-state counts must sit within 3 sigma of the analytical
trajectory on at least 95% of steps; the same run scored against a model
with p_bind doubled must fail that bar. Two CLI runs with the same seed
and partitioning must produce byte-identical output.

Expected:
  within_fraction            >= 0.95
  negative_within_fraction   <  0.95
  conservation_defect         0
  byte_identical              1
"""

from mfmc.cli import expected_trajectory
from mfmc.particle_oracle import PbsConfig, compare_to_model, run_pbs

DESCRIPTION = "Particle simulation vs analytical model, negative control, determinism"

EXPECTED = {
    "within_fraction": (0.95, 1.0),
    "negative_within_fraction": (0.0, 0.9499),
    "conservation_defect": (0.0, 0.0),
    "byte_identical": (1.0, 1.0),
}

SCENARIO = "configs/pbs_near.scn"


def run(h):
    scenario, model = h.load(SCENARIO)
    particles = scenario.pbs_particles()
    result = run_pbs(PbsConfig.pulse(model, particles, scenario.K, scenario.seed, partitions=4, workers=4))
    h.metric("conservation_defect", result.conservation_defect())

    report = compare_to_model(result, expected_trajectory(model, scenario))
    h.metric("within_fraction", report.within_fraction)
    h.metric("max_abs_residual", report.max_abs_residual)

    doubled_k_on = 2 * scenario.cfg.k_on
    wrong_scenario, wrong_model = h.load(SCENARIO, f"k_on={doubled_k_on!r}")
    negative = compare_to_model(result, expected_trajectory(wrong_model, wrong_scenario))
    h.metric("negative_within_fraction", negative.within_fraction)

    flags = ("--particles", "5000", "--seed", "424242", "--partitions", "3", "--workers", "3")
    first = h.pbs(SCENARIO, *flags)
    second = h.pbs(SCENARIO, *flags)
    h.metric("byte_identical", first.read_bytes() == second.read_bytes())
