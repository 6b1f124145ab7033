import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from app.core.exceptions import DomainError
from app.models.models import (
    MarginDistribution,
    NoiseDistribution,
    RepresentationRule,
    SizeDistribution,
    Society,
    WeightAllocation,
)
from app.services.model import (
    draw_margins,
    draw_society,
    eval_rule,
    exact_margin_atoms,
    exact_rule_value,
    make_stream,
    margin_atoms,
    materialize_weights,
    repeat_pattern,
    rule_values,
    sample_margin,
    second_moment,
    validate_rule,
)

STEP = RepresentationRule(kind="step", breakpoints=(0.2, 0.6), values=(0.3, 1.0))


def test_named_rules_are_valid():
    assert validate_rule(RepresentationRule(kind="winner_take_all")) == []
    assert validate_rule(RepresentationRule(kind="proportional")) == []
    assert validate_rule(STEP) == []


def test_decreasing_step_rule_reports_monotonicity():
    rule = RepresentationRule(kind="step", breakpoints=(0.2, 0.6), values=(0.8, 0.4))
    codes = {v.code for v in validate_rule(rule)}
    assert "monotonicity" in codes


def test_zero_step_rule_reports_null():
    rule = RepresentationRule(kind="step", breakpoints=(0.5,), values=(0.0,))
    assert [v.code for v in validate_rule(rule)] == ["null"]


def test_step_rule_is_right_continuous():
    assert eval_rule(STEP, 0.1) == 0.0
    assert eval_rule(STEP, 0.2) == 0.3
    assert eval_rule(STEP, 0.6) == 1.0
    assert eval_rule(STEP, -0.6) == -1.0
    assert eval_rule(STEP, 0.0) == 0.0


def test_eval_rule_rejects_out_of_domain():
    with pytest.raises(DomainError):
        eval_rule(RepresentationRule(kind="winner_take_all"), 1.5)


@given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
def test_rules_are_odd(x):
    for rule in (STEP, RepresentationRule(kind="winner_take_all"), RepresentationRule(kind="proportional")):
        assert rule_values(rule, np.asarray(-x)) == -rule_values(rule, np.asarray(x))


def test_exact_rule_value_reads_decimals():
    assert exact_rule_value(STEP, Fraction(1, 5)) == Fraction(3, 10)
    assert exact_rule_value(STEP, Fraction(-7, 10)) == Fraction(-1)
    assert exact_rule_value(RepresentationRule(kind="proportional"), Fraction(1, 3)) == Fraction(1, 3)


def test_society_rejects_zero_size_group():
    with pytest.raises(ValidationError):
        Society(sizes=(3.0, 0.0))


def test_society_respects_size_bound():
    with pytest.raises(ValidationError):
        Society(sizes=(3.0, 5.0), size_bound=4.0)


def test_all_zero_weights_rejected():
    with pytest.raises(ValidationError):
        WeightAllocation(weights=(0.0, 0.0, 0.0))


def test_allocation_needs_exactly_one_source():
    with pytest.raises(ValidationError):
        WeightAllocation(weights=(1.0,), law="constant")
    with pytest.raises(ValidationError):
        WeightAllocation()


def test_power_law_weights():
    society = Society(sizes=(1.0, 4.0, 9.0))
    alloc = WeightAllocation(law="power", gamma=0.5)
    assert materialize_weights(society, alloc) == pytest.approx([1.0, 2.0, 3.0])


def test_power_law_clipped_to_weight_bound():
    society = Society(sizes=(1.0, 4.0, 9.0))
    alloc = WeightAllocation(law="proportional", weight_bound=5.0)
    assert materialize_weights(society, alloc) == [1.0, 4.0, 5.0]


def test_table_law_zero_on_society_is_an_error():
    society = Society(sizes=(1.0, 2.0))
    alloc = WeightAllocation(law="table", edges=(10.0, 20.0), values=(0.0, 1.0))
    with pytest.raises(DomainError):
        materialize_weights(society, alloc)


def test_explicit_weights_must_match_groups():
    with pytest.raises(DomainError):
        materialize_weights(Society(sizes=(1.0, 2.0)), WeightAllocation(weights=(1.0,)))


def test_second_moments():
    assert second_moment(MarginDistribution(kind="rademacher")) == 1.0
    assert second_moment(MarginDistribution(kind="uniform")) == pytest.approx(1.0 / 3.0)
    # Beta(1, 1) is the uniform law
    assert second_moment(MarginDistribution(kind="symmetric_beta", alpha=1.0)) == pytest.approx(1.0 / 3.0)


def test_discrete_margin_is_mirrored():
    dist = MarginDistribution(kind="discrete_symmetric", points=(0.0, 0.5), probabilities=(0.2, 0.8))
    values, probs = margin_atoms(dist)
    np.testing.assert_allclose(values, [-0.5, 0.0, 0.5])
    np.testing.assert_allclose(probs, [0.4, 0.2, 0.4])
    assert exact_margin_atoms(dist) == [
        (Fraction(-1, 2), Fraction(2, 5)),
        (Fraction(0), Fraction(1, 5)),
        (Fraction(1, 2), Fraction(2, 5)),
    ]


def test_degenerate_discrete_margin_rejected():
    with pytest.raises(ValidationError):
        MarginDistribution(kind="discrete_symmetric", points=(0.0,), probabilities=(1.0,))


def test_beta_margin_needs_alpha():
    with pytest.raises(ValidationError):
        MarginDistribution(kind="symmetric_beta")


def test_tabulated_noise_must_be_monotone():
    with pytest.raises(ValidationError):
        NoiseDistribution(kind="tabulated", points=(0.5, 1.0), cdf=(0.9, 0.8))


def test_streams_are_reproducible():
    dist = MarginDistribution(kind="uniform")
    a = draw_margins(dist, make_stream(7, 3), (100, 4))
    b = draw_margins(dist, make_stream(7, 3), (100, 4))
    c = draw_margins(dist, make_stream(7, 4), (100, 4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(np.abs(a) <= 1.0)


MARGINS = [
    MarginDistribution(kind="rademacher"),
    MarginDistribution(kind="uniform"),
    MarginDistribution(kind="symmetric_beta", alpha=2.0),
    MarginDistribution(kind="discrete_symmetric", points=(0.0, 0.25, 1.0), probabilities=(0.1, 0.6, 0.3)),
]


@pytest.mark.parametrize("dist", MARGINS, ids=lambda d: d.kind)
def test_sample_margin_is_a_scalar_in_range(dist):
    stream = make_stream(5)
    draws = [sample_margin(dist, stream) for _ in range(200)]
    assert all(isinstance(x, float) and -1.0 <= x <= 1.0 for x in draws)
    assert len(set(draws)) > 1


def test_uniform_draws_are_centered():
    x = draw_margins(MarginDistribution(kind="uniform"), make_stream(2), 1_000_000)
    assert abs(x.mean()) < 0.005


def test_beta_two_second_moment():
    x = draw_margins(MarginDistribution(kind="symmetric_beta", alpha=2.0), make_stream(3), 1_000_000)
    assert second_moment(MarginDistribution(kind="symmetric_beta", alpha=2.0)) == pytest.approx(0.2)
    assert abs((x * x).mean() - 0.2) < 0.005


@pytest.mark.parametrize("dist", MARGINS, ids=lambda d: d.kind)
def test_sample_moments_match_the_law(dist):
    m = 200_000
    x = draw_margins(dist, make_stream(4), m)

    def within(values, target, k=4.0):
        return abs(values.mean() - target) <= k * values.std() / math.sqrt(m) + 1e-15

    assert within(x, 0.0)
    assert within(x**3, 0.0)
    assert within(x * x, second_moment(dist))


def test_draw_society_uses_support():
    limit = SizeDistribution(support=(1.0, 2.0, 3.0), probabilities=(0.2, 0.3, 0.5))
    first = draw_society(limit, 50, seed=11)
    second = draw_society(limit, 50, seed=11)
    assert first.sizes == second.sizes
    assert set(first.sizes) <= {1.0, 2.0, 3.0}
    assert first.limit_dist == limit


def test_repeat_pattern():
    assert repeat_pattern((1, 2), 5).sizes == (1.0, 2.0, 1.0, 2.0, 1.0)
