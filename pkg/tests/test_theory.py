import numpy as np
import pytest

from anomgen.basis import PolynomialBasis
from anomgen.lotteries import sample_random_menu
from anomgen.theory import (FitConfig, TheorySpec, eu_difference_features,
                            fit_theta, min_theory_loss, theory_choice_prob,
                            theory_loss, theory_loss_grad_features)
from conftest import central_difference, flat_menu_fn


def pooled_kl(targets, q):
    targets = np.asarray(targets, dtype=float)
    return float(np.mean(targets * np.log(targets / q)
                         + (1 - targets) * np.log((1 - targets) / (1 - q))))


ALLAIS_POOLED_KL = pooled_kl([0.2, 0.8], 0.5)   # independent closed form


@pytest.fixture
def basis10():
    return PolynomialBasis(order=6, domain=(0, 10))


class TestTheoryChoiceProb:
    def test_identical_lotteries(self, basis10):
        m = sample_random_menu(np.random.default_rng(0), 2, 0, 10)
        from anomgen.lotteries import Menu
        menu = Menu(m.lottery0, m.lottery0)
        spec = TheorySpec(basis10, np.random.default_rng(1).normal(size=6))
        assert theory_choice_prob(spec, menu) == pytest.approx(0.5)

    def test_zero_theta_is_indifferent_everywhere(self, basis10):
        spec = TheorySpec(basis10, np.zeros(6))
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = sample_random_menu(rng, 2, 0, 10)
            assert theory_choice_prob(spec, m) == pytest.approx(0.5)

    def test_allais_menus_representationally_equivalent(self, allais_menus):
        # The EU-difference functionals are algebraically identical.
        menu_a, menu_b = allais_menus
        basis = PolynomialBasis(order=6, domain=(0, 5e6))
        rng = np.random.default_rng(3)
        for _ in range(100):
            spec = TheorySpec(basis, rng.normal(size=6))
            fa = theory_choice_prob(spec, menu_a)
            fb = theory_choice_prob(spec, menu_b)
            assert abs(fa - fb) < 1e-12


class TestFitTheta:
    def test_single_example_fits_exactly(self, basis10):
        m = sample_random_menu(np.random.default_rng(4), 2, 0, 10)
        for target in (0.1, 0.37, 0.9):
            fit = fit_theta(basis10, [(m, target)])
            assert fit.kl < 1e-8

    def test_self_consistency(self, basis10):
        # Targets generated by some f_theta0 must be fit back to zero KL.
        rng = np.random.default_rng(5)
        theta0 = rng.normal(0, 0.5, size=6)
        spec0 = TheorySpec(basis10, theta0)
        menus = [sample_random_menu(rng, 2, 0, 10) for _ in range(10)]
        fit = fit_theta(basis10, [(m, theory_choice_prob(spec0, m)) for m in menus])
        assert fit.kl < 1e-8

    def test_allais_pooled_closed_form(self, allais_menus):
        menu_a, menu_b = allais_menus
        basis = PolynomialBasis(order=6, domain=(0, 5e6))
        fit = min_theory_loss(basis, [(menu_a, 0.2), (menu_b, 0.8)])
        assert fit.kl == pytest.approx(ALLAIS_POOLED_KL, abs=1e-3)
        assert fit.kl == pytest.approx(0.1927, abs=1e-3)

    def test_loss_non_increasing_in_restarts(self, basis10):
        rng = np.random.default_rng(6)
        menus = [sample_random_menu(rng, 2, 0, 10) for _ in range(4)]
        examples = [(m, t) for m, t in zip(menus, (0.9, 0.1, 0.8, 0.2))]
        losses = [min_theory_loss(basis10, examples, restarts=r).cross_entropy
                  for r in (1, 3, 6)]
        assert losses[0] >= losses[1] - 1e-12
        assert losses[1] >= losses[2] - 1e-12

    def test_constant_basis_member_changes_nothing(self, basis10):
        # A constant utility shift is invisible to choice probabilities.
        class Augmented:
            dim = basis10.dim + 1
            domain = basis10.domain

            def eval(self, z):
                base = basis10.eval(z)
                return np.concatenate([base, np.ones((base.shape[0], 1))], axis=1)

            def deriv(self, z):
                base = basis10.deriv(z)
                return np.concatenate([base, np.zeros((base.shape[0], 1))], axis=1)

        rng = np.random.default_rng(7)
        menus = [sample_random_menu(rng, 2, 0, 10) for _ in range(5)]
        examples = [(m, t) for m, t in zip(menus, (0.9, 0.15, 0.6, 0.4, 0.8))]
        plain = min_theory_loss(basis10, examples).cross_entropy
        augmented = min_theory_loss(Augmented(), examples).cross_entropy
        assert augmented == pytest.approx(plain, abs=1e-8)

    def test_empty_examples_rejected(self, basis10):
        with pytest.raises(ValueError):
            fit_theta(basis10, [])


class TestTheoryLoss:
    def test_exact_fit_gives_zero_kl_and_stationary_features(self, basis10):
        rng = np.random.default_rng(8)
        m = sample_random_menu(rng, 2, 0.5, 9.5)
        target = 0.42
        fit = fit_theta(basis10, [(m, target)])
        spec = TheorySpec(basis10, fit.theta)
        ce, kl = theory_loss(spec, [(m, target)])
        assert kl < 1e-10
        grad = theory_loss_grad_features(spec, [(m, target)])[0]
        assert np.linalg.norm(grad) < 1e-6

    def test_gradient_matches_finite_differences(self, basis10):
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(50):
            m = sample_random_menu(rng, 2, 0.5, 9.5)
            spec = TheorySpec(basis10, rng.normal(0, 0.4, size=6))
            target = rng.uniform(0.05, 0.95)
            grad = theory_loss_grad_features(spec, [(m, target)])[0]
            fd = central_difference(
                flat_menu_fn(lambda menu: theory_loss(spec, [(menu, target)])[0], 2),
                m.flatten())
            worst = max(worst, np.max(np.abs(fd - grad) / (np.abs(grad) + 1e-8)))
        assert worst < 1e-5

    def test_duplication_leaves_mean_loss_unchanged(self, basis10):
        rng = np.random.default_rng(10)
        m = sample_random_menu(rng, 2, 0, 10)
        spec = TheorySpec(basis10, rng.normal(size=6))
        once = theory_loss(spec, [(m, 0.3)])
        twice = theory_loss(spec, [(m, 0.3), (m, 0.3)])
        assert twice[0] == pytest.approx(once[0], rel=1e-12)

    def test_features_linear_in_probabilities(self, basis10):
        # d(x) is linear in each probability block at fixed payoffs.
        rng = np.random.default_rng(11)
        m = sample_random_menu(rng, 2, 0, 10)
        d = eu_difference_features(basis10, m)
        assert d.shape == (6,)
