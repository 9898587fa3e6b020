"""
Scenario: reference_trends

The shipped sweeps through the CLI. Faster flow (Pe 360 against Pe 60)
makes the pulse response peak earlier and higher while lowering the
equilibrium gain; a farther receiver peaks later and lower; a continuous
release settles at gain * u0.

Expected:
  pe_slow / pe_fast             60 / 360
  peak_time_ratio_fast_slow     < 1
  peak_height_ratio_fast_slow   > 1
  gain_ratio_fast_slow          < 1
  distance_delay_ordered        1
  distance_height_ordered       1
  continuous_settle_ratio       within 1% of 1
"""

DESCRIPTION = "Pulse / continuous sweeps over flow speed and receiver distance"

EXPECTED = {
    "pe_slow": (60.0, 60.0),
    "pe_fast": (360.0, 360.0),
    "peak_time_ratio_fast_slow": (0.0, 0.999),
    "peak_height_ratio_fast_slow": (1.001, float("inf")),
    "gain_ratio_fast_slow": (0.0, 0.999),
    "distance_delay_ordered": (1.0, 1.0),
    "distance_height_ordered": (1.0, 1.0),
    "continuous_settle_ratio_slow": (0.99, 1.01),
    "continuous_settle_ratio_fast": (0.99, 1.01),
}


def _numeric(rows):
    return [{k: float(v) for k, v in r.items()} for r in rows]


def run(h):
    slow, fast = _numeric(h.sweep("configs/flow_pulse.sweep", "--workers", "2"))
    h.metric("pe_slow", slow["Pe"])
    h.metric("pe_fast", fast["Pe"])
    h.metric("peak_time_ratio_fast_slow", fast["peak_k"] / slow["peak_k"])
    h.metric("peak_height_ratio_fast_slow", fast["peak_z"] / slow["peak_z"])
    h.metric("gain_ratio_fast_slow", fast["equilibrium_gain"] / slow["equilibrium_gain"])

    by_distance = _numeric(h.sweep("configs/distance.sweep", "--workers", "3"))
    delays = [r["peak_k"] for r in by_distance]
    heights = [r["peak_z"] for r in by_distance]
    h.metric("distance_delay_ordered", all(a < b for a, b in zip(delays, delays[1:])))
    h.metric("distance_height_ordered", all(a > b for a, b in zip(heights, heights[1:])))

    # Continuous release of u0 = 1e3 per step; the peak is the last, settled value.
    for label, row in zip(("slow", "fast"), _numeric(h.sweep("configs/flow_continuous.sweep", "--workers", "2"))):
        h.metric(f"continuous_settle_ratio_{label}", row["peak_z"] / (row["equilibrium_gain"] * 1e3))
