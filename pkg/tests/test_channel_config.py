"""Tests for channel configs, validation and elementary probabilities."""

import math
from dataclasses import replace

import numpy as np
import pytest

from mfmc.channel_config import (
    REFERENCE_CHANNEL,
    ChannelConfig,
    elementary_probabilities,
    format_config,
    load_config,
    parse_key_values,
    peclet_number,
    resolve_alias,
    validate_config,
)
from mfmc.errors import (
    ConfigError,
    MalformedLine,
    MissingKey,
    NonPositiveStep,
    ReceiverIndexError,
    StabilityViolation,
    UnknownKey,
)
from mfmc.markov_kernel import build_transition_model, full_transition_matrix


def _unit_config(p_diff=0.0, p_flow=0.0, p_bind=0.0, p_unbind=0.0, N=6, r=3) -> ChannelConfig:
    """dx = dt = c_p = 1, so each rate is its own per-step probability."""
    return ChannelConfig(
        D=p_diff, v=p_flow, k_on=p_bind, k_off=p_unbind, c_p=1.0, dx=1.0, dt=1.0, N=N, r=r
    )


def _write(tmp_path, text, name="channel.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestValidate:
    def test_table_one_is_valid(self):
        cfg = validate_config(REFERENCE_CHANNEL)
        ep = elementary_probabilities(cfg)
        assert ep.p_diff == pytest.approx(0.04, rel=1e-12)
        assert ep.p_diff <= 0.5

    def test_printed_dx_violates_stability(self):
        with pytest.raises(StabilityViolation) as exc:
            validate_config(replace(REFERENCE_CHANNEL, dx=1e-8))
        assert exc.value.quantity == "p_diff"
        assert exc.value.value == pytest.approx(400.0)
        assert "p_diff" in str(exc.value)

    def test_zero_rates_are_valid(self):
        cfg = ChannelConfig(D=0, v=0, k_on=0, k_off=0, c_p=0, dx=1, dt=1, N=4, r=2)
        ep = elementary_probabilities(validate_config(cfg))
        assert (ep.p_diff, ep.p_bind, ep.p_unbind, ep.p_flow) == (0.0, 0.0, 0.0, 0.0)

    @pytest.mark.parametrize("r", [0, 1, 300, 301])
    def test_receiver_out_of_range(self, r):
        with pytest.raises(ReceiverIndexError) as exc:
            validate_config(replace(REFERENCE_CHANNEL, r=r))
        assert isinstance(exc.value, IndexError)
        assert exc.value.key == "r"

    def test_too_few_states(self):
        with pytest.raises(ReceiverIndexError):
            validate_config(_unit_config(N=3, r=2))

    @pytest.mark.parametrize("key", ["dx", "dt"])
    @pytest.mark.parametrize("value", [0.0, -1e-6, math.nan])
    def test_non_positive_step(self, key, value):
        with pytest.raises(NonPositiveStep) as exc:
            validate_config(replace(REFERENCE_CHANNEL, **{key: value}))
        assert exc.value.key == key

    @pytest.mark.parametrize("key", ["D", "v", "k_on", "k_off", "c_p"])
    def test_negative_physical_parameter(self, key):
        with pytest.raises(ConfigError) as exc:
            validate_config(replace(REFERENCE_CHANNEL, **{key: -1.0}))
        assert exc.value.key == key

    def test_negative_interior_self_transition(self):
        with pytest.raises(StabilityViolation) as exc:
            validate_config(_unit_config(p_diff=0.45, p_flow=0.2))
        assert exc.value.quantity == "2*p_diff+p_flow"

    def test_negative_receiver_self_transition(self):
        with pytest.raises(StabilityViolation) as exc:
            validate_config(_unit_config(p_diff=0.3, p_flow=0.2, p_bind=0.3))
        assert exc.value.quantity == "2*p_diff+p_flow+p_bind"

    def test_accepts_iff_every_matrix_entry_is_a_probability(self):
        rng = np.random.default_rng(1234)
        accepted = rejected = 0
        for _ in range(300):
            cfg = _unit_config(
                p_diff=rng.uniform(0, 0.6),
                p_flow=rng.uniform(0, 0.5),
                p_bind=rng.uniform(0, 0.5),
                p_unbind=rng.uniform(0, 1.2),
            )
            ep = elementary_probabilities(cfg)
            P = full_transition_matrix(build_transition_model(cfg, ep))
            in_range = bool(np.all((P >= 0.0) & (P <= 1.0)))
            try:
                validate_config(cfg)
                valid = True
            except StabilityViolation:
                valid = False
            assert valid == in_range
            accepted += valid
            rejected += not valid
        assert accepted > 0 and rejected > 0


class TestElementaryProbabilities:
    def test_table_one_rates(self):
        ep = elementary_probabilities(validate_config(REFERENCE_CHANNEL))
        assert ep.p_bind == pytest.approx(4.8e-3, rel=1e-12)
        assert ep.p_unbind == pytest.approx(2.4e-3, rel=1e-12)
        assert ep.p_flow == pytest.approx(8e-3, rel=1e-12)

    def test_no_flow(self):
        ep = elementary_probabilities(validate_config(replace(REFERENCE_CHANNEL, v=0.0)))
        assert ep.p_flow == 0.0

    def test_doubling_dt_doubles_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            cfg = ChannelConfig(
                D=rng.uniform(0, 1e-10),
                v=rng.uniform(0, 1e-4),
                k_on=rng.uniform(0, 1e9),
                k_off=rng.uniform(0, 5),
                c_p=rng.uniform(0, 1e-8),
                dx=1e-6,
                dt=rng.uniform(1e-5, 1e-3),
                N=50,
                r=10,
            )
            one = elementary_probabilities(cfg)
            two = elementary_probabilities(replace(cfg, dt=2 * cfg.dt))
            assert two.p_diff == 2 * one.p_diff
            assert two.p_bind == 2 * one.p_bind
            assert two.p_unbind == 2 * one.p_unbind
            assert two.p_flow == 2 * one.p_flow

    def test_self_transitions_are_complements(self):
        ep = elementary_probabilities(validate_config(REFERENCE_CHANNEL))
        assert ep.interior_self() + ep.hop_downstream() + ep.p_diff == pytest.approx(1.0, abs=1e-15)
        assert ep.receiver_self() == pytest.approx(1 - 0.088 - 0.0048, abs=1e-12)


class TestPeclet:
    def test_reference_velocities(self):
        assert peclet_number(REFERENCE_CHANNEL) == pytest.approx(60.0, rel=1e-12)
        assert peclet_number(replace(REFERENCE_CHANNEL, v=6e-5)) == pytest.approx(360.0, rel=1e-12)

    def test_no_flow_is_zero(self):
        assert peclet_number(replace(REFERENCE_CHANNEL, v=0.0)) == 0.0

    def test_no_diffusion_is_infinite(self):
        assert peclet_number(replace(REFERENCE_CHANNEL, D=0.0)) == math.inf

    def test_geometry(self):
        assert REFERENCE_CHANNEL.L == pytest.approx(3e-4)
        assert REFERENCE_CHANNEL.d == pytest.approx(1e-4)


class TestConfigFile:
    def test_load_with_comments_and_scientific_notation(self, tmp_path):
        path = _write(tmp_path, format_config(REFERENCE_CHANNEL) + "# trailing comment\n\n")
        assert load_config(path) == REFERENCE_CHANNEL

    def test_inline_comment(self, tmp_path):
        text = format_config(REFERENCE_CHANNEL).replace("r = 100", "r = 120   # receiver")
        assert load_config(_write(tmp_path, text)).r == 120

    def test_unknown_key(self, tmp_path):
        path = _write(tmp_path, format_config(REFERENCE_CHANNEL) + "gamma = 1\n")
        with pytest.raises(UnknownKey) as exc:
            load_config(path)
        assert exc.value.key == "gamma"

    def test_missing_key(self, tmp_path):
        text = "".join(line for line in format_config(REFERENCE_CHANNEL).splitlines(True) if not line.startswith("k_off"))
        with pytest.raises(MissingKey) as exc:
            load_config(_write(tmp_path, text))
        assert exc.value.key == "k_off"

    def test_malformed_line(self):
        with pytest.raises(MalformedLine):
            parse_key_values("D 5e-11\n", ["D"])

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_key_values("D = 1\nD = 2\n", ["D"])
        assert exc.value.key == "D"

    def test_nan_rejected(self, tmp_path):
        text = format_config(REFERENCE_CHANNEL).replace("D = 5e-11", "D = nan")
        with pytest.raises(ConfigError) as exc:
            load_config(_write(tmp_path, text))
        assert exc.value.key == "D"

    def test_fractional_state_count_rejected(self, tmp_path):
        text = format_config(REFERENCE_CHANNEL).replace("N = 301", "N = 300.5")
        with pytest.raises(ConfigError) as exc:
            load_config(_write(tmp_path, text))
        assert exc.value.key == "N"

    def test_overrides_accept_unit_aliases(self, tmp_path):
        path = _write(tmp_path, format_config(REFERENCE_CHANNEL))
        cfg = load_config(path, overrides={"v_um_s": 60.0, "r": 200})
        assert cfg.v == 6e-5
        assert cfg.r == 200 and isinstance(cfg.r, int)

    def test_shipped_table_one(self):
        from pathlib import Path

        path = Path(__file__).resolve().parents[1] / "configs" / "reference.conf"
        assert load_config(path) == REFERENCE_CHANNEL


class TestAliases:
    def test_velocity(self):
        assert resolve_alias("v_um_s", 10.0) == ("v", 1e-5)

    def test_plain_key_passes_through(self):
        assert resolve_alias("k_on", 6e8) == ("k_on", 6e8)

    def test_with_value_coerces_integers(self):
        cfg = REFERENCE_CHANNEL.with_value("r", 200.0)
        assert cfg.r == 200 and isinstance(cfg.r, int)

    def test_with_value_unknown_key(self):
        with pytest.raises(UnknownKey):
            REFERENCE_CHANNEL.with_value("u0", 1.0)
