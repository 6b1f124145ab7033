import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from app.core.exceptions import DomainError
from app.models.models import MarginDistribution, RepresentationRule, SizeDistribution, WeightAllocation
from app.services import analytics
from app.services.stats import SkewNormal, sn_cdf, sn_mean

UNIFORM = MarginDistribution(kind="uniform")
WTA = RepresentationRule(kind="winner_take_all")
STEP = RepresentationRule(kind="step", breakpoints=(0.1, 0.5), values=(0.4, 1.0))

positive = st.floats(min_value=0.1, max_value=50.0, allow_nan=False, allow_infinity=False)


def test_rho_uniform_wta_closed_form_and_quadrature():
    expected = math.sqrt(3.0) / 2.0
    assert analytics.rho(UNIFORM, WTA, method="closed_form") == pytest.approx(expected, abs=1e-15)
    assert analytics.rho(UNIFORM, WTA, method="quadrature") == pytest.approx(expected, abs=1e-10)


def test_rho_uniform_step_closed_form_and_quadrature():
    closed = analytics.rho(UNIFORM, STEP, method="closed_form")
    numeric = analytics.rho(UNIFORM, STEP, method="quadrature")
    assert numeric == pytest.approx(closed, abs=1e-9)
    assert 0.0 < closed < 1.0


def test_rho_of_proportional_rule_is_one():
    assert analytics.rho(MarginDistribution(kind="symmetric_beta", alpha=2.0), RepresentationRule(kind="proportional")) == 1.0


def test_rho_rademacher_is_one_for_any_valid_rule():
    assert analytics.rho(MarginDistribution(kind="rademacher"), STEP) == 1.0


def test_rho_discrete_margin():
    dist = MarginDistribution(kind="discrete_symmetric", points=(0.5, 1.0), probabilities=(0.5, 0.5))
    # E|X| = 0.75, E[X^2] = 0.625, r(X)^2 = 1
    assert analytics.rho(dist, WTA) == pytest.approx(0.75 / math.sqrt(0.625), abs=1e-14)


def test_rho_of_rule_vanishing_on_support_is_an_error():
    dist = MarginDistribution(kind="discrete_symmetric", points=(0.5,), probabilities=(1.0,))
    rule = RepresentationRule(kind="step", breakpoints=(0.9,), values=(1.0,))
    with pytest.raises(DomainError):
        analytics.rho(dist, rule)


def test_rho_closed_form_unavailable():
    with pytest.raises(DomainError):
        analytics.rho(MarginDistribution(kind="symmetric_beta", alpha=3.0), WTA, method="closed_form")


def test_cosine_of_proportional_weights_is_one():
    assert analytics.cosine((3, 2, 2), (3, 2, 2)) == pytest.approx(1.0, abs=1e-15)


def test_cosine_rejects_mismatched_lengths():
    with pytest.raises(DomainError):
        analytics.cosine((1, 2), (1, 2, 3))


@given(st.lists(positive, min_size=1, max_size=12), st.data())
def test_cosine_is_scale_invariant_and_bounded(sizes, data):
    weights = data.draw(st.lists(positive, min_size=len(sizes), max_size=len(sizes)))
    c = analytics.cosine(sizes, weights)
    assert 0.0 < c <= 1.0
    assert analytics.cosine([3.0 * s for s in sizes], [7.0 * a for a in weights]) == pytest.approx(c, rel=1e-12)


def test_hat_c_sqrt_is_one_for_sqrt_weights():
    sizes = (1.0, 4.0, 9.0)
    assert analytics.hat_c_sqrt(sizes, sizes) == pytest.approx(1.0, abs=1e-15)
    assert analytics.sqrt_cosine(sizes, (1.0, 2.0, 3.0)) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=100)
@given(st.lists(positive, min_size=2, max_size=10), st.data())
def test_sainte_lague_is_ordinally_inverse_to_hat_c_sqrt(sizes, data):
    n = len(sizes)
    a = np.asarray(data.draw(st.lists(positive, min_size=n, max_size=n)))
    b = np.asarray(data.draw(st.lists(positive, min_size=n, max_size=n)))
    b = b * (a.sum() / b.sum())
    sl_a, sl_b = analytics.sainte_lague(sizes, a), analytics.sainte_lague(sizes, b)
    assume(abs(sl_a - sl_b) > 1e-9 * max(sl_a, sl_b))
    diff_c = analytics.hat_c_sqrt(sizes, a) - analytics.hat_c_sqrt(sizes, b)
    assert np.sign(diff_c) == -np.sign(sl_a - sl_b)


@settings(max_examples=100)
@given(st.lists(positive, min_size=1, max_size=9), st.data())
def test_swapping_weights_of_equal_groups_ties_both_indices(sizes, data):
    sizes = [sizes[0]] + sizes
    n = len(sizes)
    a = data.draw(st.lists(positive, min_size=n, max_size=n))
    assume(a[0] != a[1])
    b = [a[1], a[0]] + a[2:]
    assert abs(analytics.sainte_lague(sizes, a) - analytics.sainte_lague(sizes, b)) <= 1e-12
    assert abs(analytics.hat_c_sqrt(sizes, a) - analytics.hat_c_sqrt(sizes, b)) <= 1e-12


def test_cosine_limit_constant_law():
    limit = SizeDistribution(support=(1.0, 2.0), probabilities=(0.5, 0.5))
    c = analytics.cosine_limit(limit, WeightAllocation(law="constant"))
    assert c == pytest.approx(1.5 / math.sqrt(2.5), abs=1e-12)
    assert c == pytest.approx(0.94868, abs=1e-5)


def test_sqrt_cosine_limit_of_sqrt_law_is_one():
    limit = SizeDistribution(support=(1.0, 2.0, 3.0), probabilities=(0.2, 0.3, 0.5))
    assert analytics.sqrt_cosine_limit(limit, WeightAllocation(law="power", gamma=0.5)) == pytest.approx(1.0, abs=1e-14)


def test_limit_indices_need_a_law():
    limit = SizeDistribution(support=(1.0,), probabilities=(1.0,))
    with pytest.raises(DomainError):
        analytics.cosine_limit(limit, WeightAllocation(weights=(1.0,)))


def test_lambda_param():
    assert analytics.lambda_param(0.5, 1.0) == pytest.approx(0.5 / math.sqrt(0.75))
    assert analytics.lambda_param(1.0, 1.0) == math.inf
    assert analytics.lambda_param(0.0, 0.7) == 0.0


def test_limits_for_uniform_wta_equal_weights():
    profile = analytics.asymptotic_objectives(math.sqrt(3.0) / 2.0, 1.0)
    assert profile.p_limit == pytest.approx(1.0 / 6.0, abs=1e-14)
    assert profile.u_limit == pytest.approx(math.sqrt(2.0 / math.pi) * math.sqrt(3.0) / 2.0, abs=1e-15)
    assert profile.lam == pytest.approx(math.sqrt(3.0))
    assert set(profile.as_dict()) == {"rho", "c_star", "lambda", "u_limit", "delta_limit", "p_limit"}


def test_delta_identity_across_grid():
    for product in np.linspace(0.0, 1.0, 41):
        profile = analytics.asymptotic_objectives(float(product), 1.0)
        assert profile.delta_limit == pytest.approx((1.0 - product) / math.sqrt(2.0 * math.pi), abs=1e-14)
        assert profile.delta_limit == pytest.approx((math.sqrt(2.0 / math.pi) - profile.u_limit) / 2.0, abs=1e-14)


def test_limit_u_matches_skew_normal_mean():
    profile = analytics.asymptotic_objectives(0.8, 0.9)
    assert profile.u_limit == pytest.approx(sn_mean(SkewNormal(profile.lam)), abs=1e-14)
    assert profile.p_limit == pytest.approx(sn_cdf(SkewNormal(profile.lam), 0.0), abs=1e-10)


def test_shipped_objectives_satisfy_bound():
    grid = np.linspace(-8.0, 8.0, 161)
    assert analytics.check_square_exponential_bound(analytics.EXPECTED_WELFARE, grid) == []
    assert analytics.check_square_exponential_bound(analytics.NEG_INVERSION, grid) == []


def test_bound_violation_is_reported():
    cubic = analytics.ExpectationObjective("exp_cubic", lambda w: np.exp(np.asarray(w) ** 3))
    failing = analytics.check_square_exponential_bound(cubic, [0.0, 1.0, 2.0])
    assert 2.0 in failing
    assert 0.0 not in failing


def test_objective_bound_constants_validated():
    with pytest.raises(DomainError):
        analytics.ExpectationObjective("bad", lambda w: w, beta=1.5)


def test_asymptotic_expectations_match_closed_forms():
    lam = analytics.lambda_param(math.sqrt(3.0) / 2.0, 1.0)
    sn = SkewNormal(lam)
    assert analytics.asymptotic_expectation(analytics.EXPECTED_WELFARE, lam) == pytest.approx(sn_mean(sn), abs=1e-9)
    assert analytics.asymptotic_expectation(analytics.NEG_INVERSION, lam) == pytest.approx(-1.0 / 6.0, abs=1e-9)


def test_asymptotic_expectation_increases_with_cosine():
    rho_value = math.sqrt(3.0) / 2.0
    values = [
        analytics.asymptotic_expectation(analytics.NEG_INVERSION, analytics.lambda_param(rho_value, c))
        for c in np.linspace(0.0, 1.0, 11)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
