import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomgen.cpt import (CptParams, CptPredictor, choice_prob,
                         choice_prob_grad, cpt_value, prob_weights,
                         simulate_choices)
from anomgen.lotteries import (Lottery, Menu, make_lottery, menu_from_flat,
                               sample_random_menu)
from conftest import central_difference, flat_menu_fn

BRUHIN_B = CptParams(0.726, 0.309)


class TestProbWeights:
    def test_identity_parameters(self):
        p = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(prob_weights(p, CptParams(1, 1)), p)

    def test_certainty_maps_to_one(self):
        np.testing.assert_allclose(prob_weights(np.array([1.0, 0.0]), BRUHIN_B),
                                   [1.0, 0.0])

    def test_subcertainty_half_half(self):
        w = prob_weights(np.array([0.5, 0.5]), BRUHIN_B)
        # delta p^g / (delta p^g + p^g) = delta / (1 + delta) at p = (.5, .5)
        assert w[0] == pytest.approx(0.726 / 1.726, abs=1e-12)
        assert w.sum() == pytest.approx(0.8412, abs=1e-4)
        assert w.sum() < 1.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            prob_weights(np.array([]), BRUHIN_B)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(4))
        perm = rng.permutation(4)
        w = prob_weights(p, BRUHIN_B)
        np.testing.assert_allclose(prob_weights(p[perm], BRUHIN_B), w[perm],
                                   rtol=1e-12)


class TestCptValue:
    def test_certain_payoff(self):
        assert cpt_value(make_lottery([5], [1.0]), BRUHIN_B) == pytest.approx(5)

    def test_identity_parameters_give_expected_value(self):
        lot = make_lottery([1, 4, 7], [0.2, 0.5, 0.3])
        assert cpt_value(lot, CptParams(1, 1)) == pytest.approx(lot.probs @ lot.payoffs)

    def test_half_half_example(self):
        lot = make_lottery([0, 10], [0.5, 0.5])
        assert cpt_value(lot, BRUHIN_B) == pytest.approx(10 * 0.726 / 1.726, abs=1e-9)


class TestChoiceProb:
    def test_identical_lotteries(self):
        lot = make_lottery([2, 6], [0.4, 0.6])
        assert choice_prob(Menu(lot, lot), BRUHIN_B) == pytest.approx(0.5)

    def test_swap_antisymmetry(self):
        m = sample_random_menu(np.random.default_rng(0), 2, 0, 10)
        f = choice_prob(m, BRUHIN_B)
        assert choice_prob(m.swapped(), BRUHIN_B) == pytest.approx(1 - f, abs=1e-12)

    def test_composed_example(self):
        menu = Menu(Lottery(np.array([5.0, 5.0]), np.array([1.0, 0.0])),
                    make_lottery([0, 10], [0.5, 0.5]))
        expected = 1 / (1 + np.exp(-(10 * 0.726 / 1.726 - 5.0)))
        assert choice_prob(menu, BRUHIN_B) == pytest.approx(expected, abs=1e-12)
        assert choice_prob(menu, BRUHIN_B) == pytest.approx(0.311, abs=1e-3)

    def test_strictly_interior(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            f = choice_prob(sample_random_menu(rng, 2, 0, 10), BRUHIN_B)
            assert 0.0 < f < 1.0


class TestChoiceProbGrad:
    def test_symmetry_for_identical_lotteries(self):
        lot = make_lottery([2, 6], [0.4, 0.6])
        g = choice_prob_grad(Menu(lot, lot), BRUHIN_B)
        np.testing.assert_allclose(g[:2], -g[4:6], rtol=1e-12)

    def test_identity_params_reduce_to_expected_value_case(self):
        m = sample_random_menu(np.random.default_rng(2), 2, 0, 10)
        g = choice_prob_grad(m, CptParams(1, 1))
        f = choice_prob(m, CptParams(1, 1))
        slope = f * (1 - f)
        np.testing.assert_allclose(g[:2], -slope * m.lottery0.probs, rtol=1e-10)
        np.testing.assert_allclose(g[4:6], slope * m.lottery1.probs, rtol=1e-10)

    def test_matches_finite_differences(self):
        params = CptParams(0.926, 0.377)
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            m = sample_random_menu(rng, 2, 0.5, 9.5)
            if m.lottery0.probs.min() < 0.05 or m.lottery1.probs.min() < 0.05:
                continue
            g = choice_prob_grad(m, params)
            fd = central_difference(
                flat_menu_fn(lambda menu: choice_prob(menu, params), 2),
                m.flatten())
            worst = max(worst, np.max(np.abs(fd - g) / (np.abs(g) + 1e-10)))
        assert worst < 1e-5

    def test_boundary_point_rejected(self):
        menu = Menu(make_lottery([1, 2], [1.0, 0.0]), make_lottery([1, 2], [0.5, 0.5]))
        with pytest.raises(ValueError, match="boundary"):
            choice_prob_grad(menu, BRUHIN_B)


class TestSimulateChoices:
    def test_bernoulli_mean_at_half(self):
        lot = make_lottery([3, 7], [0.5, 0.5])
        menu = Menu(lot, lot)   # f* = 0.5 exactly
        ds = simulate_choices(np.random.default_rng(0), [menu] * 100_000,
                              BRUHIN_B, kind="binary")
        assert 0.494 <= ds.outcomes().mean() <= 0.506

    def test_seed_determinism(self):
        menus = [sample_random_menu(np.random.default_rng(i), 2, 0, 10)
                 for i in range(20)]
        d1 = simulate_choices(np.random.default_rng(5), menus, BRUHIN_B)
        d2 = simulate_choices(np.random.default_rng(5), menus, BRUHIN_B)
        np.testing.assert_array_equal(d1.outcomes(), d2.outcomes())

    def test_rate_mode(self):
        m = sample_random_menu(np.random.default_rng(0), 2, 0, 10)
        ds = simulate_choices(np.random.default_rng(1), [m], BRUHIN_B,
                              kind="rate", count=5_000)
        assert abs(ds.outcomes()[0] - choice_prob(m, BRUHIN_B)) < 0.03

    def test_rate_requires_count(self):
        m = sample_random_menu(np.random.default_rng(0), 2, 0, 10)
        with pytest.raises(ValueError):
            simulate_choices(np.random.default_rng(1), [m], BRUHIN_B,
                             kind="rate", count=0)


class TestPredictorHandle:
    def test_predict_and_grad_consistent(self):
        pred = CptPredictor(BRUHIN_B)
        m = sample_random_menu(np.random.default_rng(4), 2, 1, 9)
        assert pred.predict(m) == choice_prob(m, BRUHIN_B)
        np.testing.assert_array_equal(pred.grad(m), choice_prob_grad(m, BRUHIN_B))

    def test_preset_lookup(self):
        assert CptParams.preset("bruhin-a") == CptParams(0.926, 0.377)
        assert CptParams.preset("bruhin-b") == CptParams(0.726, 0.309)
        assert CptParams.preset("bruhin-c") == CptParams(1.063, 0.451)
        with pytest.raises(KeyError):
            CptParams.preset("nope")
