import numpy as np
import pytest

from prospect_drive.cpt import (
    DrivingUtilities,
    Prospect,
    decide,
    decision_probabilities,
    decision_weights,
    driving_values,
    expected_driving_values,
    pass_prospect,
    prospect_value,
    value_fn,
    weighting_fn,
    yield_probability,
)
from prospect_drive.exceptions import NegativeUtilityError, UnsortedProspectError, ValidationError
from prospect_drive.models import CptParams, Decision, ValuationMode, WeightingMode


def random_prospect(rng) -> Prospect:
    n = int(rng.integers(1, 7))
    utilities = rng.uniform(-10.0, 10.0, size=n)
    probabilities = rng.dirichlet(np.ones(n))
    probabilities[-1] = 1.0 - probabilities[:-1].sum()
    return Prospect(list(zip(utilities, probabilities)))


class TestProspect:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            Prospect([(1.0, 0.5), (2.0, 0.4)])

    def test_rejects_out_of_range_probability(self):
        with pytest.raises(ValidationError):
            Prospect([(1.0, 1.5), (2.0, -0.5)])

    def test_sorted(self):
        prospect = Prospect([(3.0, 0.2), (-1.0, 0.5), (2.0, 0.3)]).sorted()
        assert prospect.utilities.tolist() == [-1.0, 2.0, 3.0]


class TestCptParams:
    def test_beta_and_delta_mirror(self):
        params = CptParams(alpha=0.7, gamma=0.6)
        assert params.beta == 0.7
        assert params.delta == 0.6

    def test_lambda_alias(self):
        params = CptParams.model_validate({"alpha": 0.8, "lambda": 2.25})
        assert params.lam == 2.25
        assert params.model_dump(by_alias=True)["lambda"] == 2.25

    def test_ranges(self):
        with pytest.raises(Exception):
            CptParams(alpha=1.2)
        with pytest.raises(Exception):
            CptParams(lam=0.5)


class TestValueFunction:
    def test_gains_and_losses(self):
        params = CptParams(alpha=0.5, beta=0.5, lam=2.0)
        assert value_fn(4.0, params) == pytest.approx(2.0)
        assert value_fn(-4.0, params) == pytest.approx(-4.0)
        assert value_fn(0.0, params) == 0.0

    def test_reference_point(self):
        params = CptParams(u0=3.0)
        assert value_fn(5.0, params) == pytest.approx(2.0)
        assert value_fn(1.0, params) == pytest.approx(-2.0)

    def test_vectorized(self):
        values = value_fn(np.array([-1.0, 0.0, 1.0]), CptParams())
        assert values.tolist() == [-1.0, 0.0, 1.0]


class TestWeightingFunction:
    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.6742, 0.9])
    def test_laws(self, gamma):
        p = np.linspace(0.0, 1.0, 1000)
        w = weighting_fn(p, gamma)
        assert w[0] == 0.0
        assert w[-1] == 1.0
        assert np.all(np.diff(w) > 0.0)
        inner = np.sign(w[1:-1] - p[1:-1])
        assert inner[0] > 0 and inner[-1] < 0
        assert np.count_nonzero(np.diff(inner[inner != 0]) != 0) == 1

    def test_identity_at_one(self):
        p = np.linspace(0.0, 1.0, 1001)
        np.testing.assert_array_equal(weighting_fn(p, 1.0), p)

    def test_scalar_in_scalar_out(self):
        assert isinstance(weighting_fn(0.3, 0.6), float)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            weighting_fn(1.2, 0.6)
        with pytest.raises(ValidationError):
            weighting_fn(0.5, 0.0)


class TestDecisionWeights:
    def test_all_gains_sum_to_one(self):
        prospect = Prospect([(1.0, 0.2), (2.0, 0.5), (3.0, 0.3)])
        params = CptParams(alpha=0.8, gamma=0.6)
        pi_plus, pi_minus = decision_weights(prospect, params)
        assert sum(pi_plus) == pytest.approx(1.0)
        assert pi_minus == [0.0, 0.0, 0.0]
        assert pi_plus[2] == pytest.approx(weighting_fn(0.3, 0.6))

    def test_mixed_prospect(self):
        prospect = Prospect([(-2.0, 0.4), (5.0, 0.6)])
        params = CptParams(gamma=0.6, delta=0.7)
        pi_plus, pi_minus = decision_weights(prospect, params)
        assert pi_minus[0] == pytest.approx(weighting_fn(0.4, 0.7))
        assert pi_plus[1] == pytest.approx(weighting_fn(0.6, 0.6))
        assert pi_plus[0] == 0.0 and pi_minus[1] == 0.0

    def test_unsorted(self):
        with pytest.raises(UnsortedProspectError):
            decision_weights(Prospect([(2.0, 0.5), (1.0, 0.5)]), CptParams())

    def test_reduces_to_expected_utility(self):
        rng = np.random.default_rng(0)
        identity = CptParams()
        for _ in range(1000):
            prospect = random_prospect(rng)
            cpt = prospect_value(prospect, identity, ValuationMode.CPT)
            eut = prospect_value(prospect, identity, ValuationMode.EUT)
            assert abs(cpt - eut) < 1e-9


class TestDrivingValues:
    utilities = DrivingUtilities(u_pass_yield=10.0, u_pass_nonyield=2.0, u_yield=6.0)

    def test_paper_exact_formula(self):
        params = CptParams.driving(0.9, 0.6)
        w = weighting_fn(0.3, 0.6)
        v_pass, v_yield = driving_values(self.utilities, 0.3, params, WeightingMode.PAPER_EXACT)
        assert v_pass == pytest.approx(10.0 ** 0.9 * (1 - w) + 2.0 ** 0.9 * w)
        assert v_yield == pytest.approx(6.0 ** 0.9)

    def test_rank_ordered_formula(self):
        params = CptParams.driving(0.9, 0.6)
        w = weighting_fn(0.3, 0.6)
        v_pass, _ = driving_values(self.utilities, 0.3, params, WeightingMode.RANK_ORDERED)
        assert v_pass == pytest.approx(10.0 ** 0.9 * w + 2.0 ** 0.9 * (1 - w))

    def test_rank_ordered_matches_general_cpt(self):
        params = CptParams.driving(0.8, 0.55)
        rng = np.random.default_rng(1)
        for _ in range(100):
            u = DrivingUtilities(*rng.uniform(0.0, 10.0, size=3))
            p = float(rng.uniform(0.0, 1.0))
            v_pass, _ = driving_values(u, p, params, WeightingMode.RANK_ORDERED)
            general = prospect_value(pass_prospect(u, p, WeightingMode.RANK_ORDERED), params)
            assert v_pass == pytest.approx(general, abs=1e-9)

    def test_identity_parameters_give_expectation(self):
        for mode in WeightingMode:
            v_pass, v_yield = driving_values(self.utilities, 0.3, CptParams.driving(1.0, 1.0), mode)
            expected = expected_driving_values(self.utilities, 0.3, mode)
            assert (v_pass, v_yield) == pytest.approx(expected)

    def test_negative_utility(self):
        with pytest.raises(NegativeUtilityError):
            driving_values(DrivingUtilities(1.0, -0.5, 1.0), 0.5, CptParams.driving(0.9, 0.6))

    def test_nonzero_reference(self):
        with pytest.raises(ValidationError):
            driving_values(self.utilities, 0.5, CptParams(u0=1.0))


class TestDecisions:
    def test_yield_probability(self):
        assert yield_probability(2.0, 2.0) == 0.5
        assert yield_probability(1.0, 4.0) > 0.9
        assert yield_probability(4.0, 1.0) < 0.1

    def test_decision_probabilities(self):
        pr_pass, pr_yield = decision_probabilities(3.0, 1.0)
        assert pr_pass == pytest.approx(1.0 / (1.0 + np.exp(-2.0)))
        assert pr_pass + pr_yield == pytest.approx(1.0)

    def test_ties_go_to_yield(self):
        assert decide(2.0, 2.0) is Decision.YIELD
        assert decide(2.0 + 1e-14, 2.0) is Decision.YIELD
        assert decide(2.1, 2.0) is Decision.PASS

    def test_near_tie_is_even(self):
        assert decision_probabilities(2.0 + 1e-14, 2.0) == (0.5, 0.5)
        assert decide(2.0 + 1e-14, 2.0) is Decision.YIELD

    def test_decide_agrees_with_probabilities(self):
        rng = np.random.default_rng(14)
        tiny = rng.choice([-1.0, 1.0], 100) * 10.0 ** rng.uniform(-15, -9, 100)
        gaps = np.concatenate((rng.normal(0.0, 3.0, 900), tiny))
        for gap in gaps:
            v_yield = float(rng.uniform(0.0, 10.0))
            pr_pass, _ = decision_probabilities(v_yield + gap, v_yield)
            assert (decide(v_yield + gap, v_yield) is Decision.PASS) == (pr_pass > 0.5)


class TestProbabilityMonotonicity:
    p = np.linspace(0.0, 1.0, 201)

    def pass_values(self, u, params, mode):
        return np.array([driving_values(u, float(q), params, mode)[0] for q in self.p])

    def test_paper_exact_decreases_with_yield_probability(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            low, high = sorted(rng.uniform(0.0, 10.0, size=2))
            u = DrivingUtilities(high + 0.1, low, rng.uniform(0.0, 10.0))
            params = CptParams.driving(rng.uniform(0.2, 1.0), rng.uniform(0.3, 1.0))
            values = self.pass_values(u, params, WeightingMode.PAPER_EXACT)
            assert np.all(np.diff(values) < 0.0)

    def test_rank_ordered_increases_with_yield_probability(self):
        u = DrivingUtilities(10.0, 2.0, 6.0)
        values = self.pass_values(u, CptParams.driving(0.9, 0.6742), WeightingMode.RANK_ORDERED)
        assert np.all(np.diff(values) > 0.0)

    def test_yield_value_ignores_probability(self):
        u = DrivingUtilities(10.0, 2.0, 6.0)
        params = CptParams.driving(0.9, 0.6742)
        values = {driving_values(u, float(q), params)[1] for q in self.p}
        assert len(values) == 1
        assert values.pop() == pytest.approx(6.0 ** 0.9)
