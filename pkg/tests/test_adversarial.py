import numpy as np
import pytest

from anomgen.adversarial import (GdaConfig, ascent_objective, gda_run,
                                 generate_adversarial, interior_menu,
                                 run_adversarial_index)
from anomgen.basis import PolynomialBasis
from anomgen.cpt import CptParams, CptPredictor
from anomgen.lotteries import Menu, menu_from_flat, sample_random_menu
from anomgen.theory import TheorySpec, fit_theta, theory_choice_prob
from conftest import central_difference

BASIS = PolynomialBasis(order=6, domain=(0, 10))


class LogitEutPredictor:
    """A predictor that IS a member of the allowable class."""

    def __init__(self, theta, scale=1.0):
        self.spec = TheorySpec(BASIS, theta, scale)
        self.label = "logit-eut"

    def predict(self, menu):
        return theory_choice_prob(self.spec, menu)

    def grad(self, menu):
        from anomgen.theory import eu_difference_grad
        f = self.predict(menu)
        return self.spec.logit_scale * f * (1 - f) * \
            eu_difference_grad(self.spec, menu)


class TestAscentObjective:
    def test_logit_objective_zero_at_indifference(self):
        lot_menu = sample_random_menu(np.random.default_rng(0), 2, 0, 10)
        menu = Menu(lot_menu.lottery0, lot_menu.lottery0)   # predictor gives 0.5
        pred = CptPredictor(CptParams(0.726, 0.309))
        spec = TheorySpec(BASIS, np.random.default_rng(1).normal(size=6))
        value, _ = ascent_objective("logit_disagreement", pred, spec, menu)
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_self_consistent_predictor_never_disagrees(self):
        rng = np.random.default_rng(2)
        theta = rng.normal(0, 0.5, size=6)
        pred = LogitEutPredictor(theta)
        spec = TheorySpec(BASIS, theta)
        for _ in range(1000):
            menu = sample_random_menu(rng, 2, 0, 10)
            value, _ = ascent_objective("logit_disagreement", pred, spec, menu)
            assert value <= 1e-12

    def test_logit_gradient_matches_finite_differences(self):
        pred = CptPredictor(CptParams(0.926, 0.377))
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(25):
            menu = sample_random_menu(rng, 2, 0.5, 9.5)
            if min(menu.lottery0.probs.min(), menu.lottery1.probs.min()) < 0.05:
                continue
            spec = TheorySpec(BASIS, rng.normal(0, 0.4, size=6))
            _, grad = ascent_objective("logit_disagreement", pred, spec, menu)

            def value_at(x):
                m = menu_from_flat(x, 2, validate=False)
                return ascent_objective("logit_disagreement", pred, spec, m)[0]

            fd = central_difference(value_at, menu.flatten())
            worst = max(worst, np.max(np.abs(fd - grad) / (np.abs(grad) + 1e-7)))
        assert worst < 1e-4

    def test_raw_loss_gradient_matches_fixed_target_differences(self):
        # The raw-loss ascent treats the predictor's value as the data point;
        # its gradient is the theory loss gradient at that frozen target.
        from anomgen.theory import theory_loss
        pred = CptPredictor(CptParams(0.926, 0.377))
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(25):
            menu = sample_random_menu(rng, 2, 0.5, 9.5)
            spec = TheorySpec(BASIS, rng.normal(0, 0.4, size=6))
            target = pred.predict(menu)
            _, grad = ascent_objective("raw_loss", pred, spec, menu)

            def value_at(x):
                m = menu_from_flat(x, 2, validate=False)
                return theory_loss(spec, [(m, target)])[0]

            fd = central_difference(value_at, menu.flatten())
            worst = max(worst, np.max(np.abs(fd - grad) / (np.abs(grad) + 1e-7)))
        assert worst < 1e-4

    def test_raw_loss_gradient_vanishes_at_exact_fit(self):
        # The vanishing-gradient regime that motivates the logit objective.
        pred = CptPredictor(CptParams(0.726, 0.309))
        rng = np.random.default_rng(4)
        for _ in range(20):
            menu = sample_random_menu(rng, 2, 0, 10)
            fit = fit_theta(BASIS, [(menu, pred.predict(menu))])
            if fit.kl > 1e-10:
                continue
            spec = TheorySpec(BASIS, fit.theta)
            _, grad = ascent_objective("raw_loss", pred, spec, menu)
            assert np.linalg.norm(grad) < 1e-6


class TestGdaRun:
    def test_zero_steps_equivalent_without_movement(self):
        # Tiny step size: final menu stays at the start, candidate duplicates.
        pred = CptPredictor(CptParams(0.726, 0.309))
        x0 = sample_random_menu(np.random.default_rng(5), 2, 0, 10)
        cfg = GdaConfig(step_size=1e-300, max_iters=3)
        result = gda_run(pred, cfg, x0)
        np.testing.assert_allclose(result.candidate.menus[1].flatten(),
                                   x0.flatten(), atol=1e-12)

    def test_simplex_feasibility_along_trajectory(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        cfg = GdaConfig(seed=6)
        for i in range(10):
            result = run_adversarial_index(pred, cfg, 6, i)
            for step in result.trajectory:
                for x in step:
                    assert abs(x[2:4].sum() - 1) < 1e-12
                    assert abs(x[6:8].sum() - 1) < 1e-12
                    assert np.all(x[2:4] >= 0) and np.all(x[6:8] >= 0)

    def test_payoffs_frozen_by_default(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        result = run_adversarial_index(pred, GdaConfig(seed=7), 7, 0)
        x0, xS = (m.flatten() for m in result.candidate.menus)
        np.testing.assert_array_equal(x0[:2], xS[:2])
        np.testing.assert_array_equal(x0[4:6], xS[4:6])

    def test_relabel_invariance(self):
        # Swapping lottery labels in the initial menu (the predictor output
        # flips with it) mirrors the whole trajectory.
        pred = CptPredictor(CptParams(0.726, 0.309))
        cfg = GdaConfig(max_iters=25)
        x0 = sample_random_menu(np.random.default_rng(8), 2, 0, 10)
        r1 = gda_run(pred, cfg, x0)
        r2 = gda_run(pred, cfg, x0.swapped())
        for s1, s2 in zip(r1.trajectory, r2.trajectory):
            m1 = menu_from_flat(s1[0], 2, validate=False)
            m2 = menu_from_flat(s2[0], 2, validate=False)
            np.testing.assert_allclose(m1.swapped().flatten(), m2.flatten(),
                                       atol=1e-9)

    def test_free_mode_requires_matching_inits(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        cfg = GdaConfig(collection_mode="free", free_size=2)
        x0 = sample_random_menu(np.random.default_rng(9), 2, 0, 10)
        with pytest.raises(ValueError):
            gda_run(pred, cfg, [x0])
        result = gda_run(pred, cfg, [x0, x0.swapped()])
        assert len(result.candidate) == 2


class TestGenerateAdversarial:
    def test_single_init_reduces_to_gda_run(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        cfg = GdaConfig(seed=10)
        batch = generate_adversarial(pred, cfg, 1, master_seed=10)
        single = run_adversarial_index(pred, cfg, 10, 0)
        np.testing.assert_array_equal(batch[0].candidate.menus[1].flatten(),
                                      single.candidate.menus[1].flatten())

    def test_master_seed_determinism(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        cfg = GdaConfig(seed=11)
        a = generate_adversarial(pred, cfg, 5, master_seed=11)
        b = generate_adversarial(pred, cfg, 5, master_seed=11)
        for ra, rb in zip(a, b):
            np.testing.assert_array_equal(ra.candidate.menus[1].flatten(),
                                          rb.candidate.menus[1].flatten())

    def test_requires_positive_inits(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        with pytest.raises(ValueError):
            generate_adversarial(pred, GdaConfig(), 0)

    def test_provenance_recorded(self):
        pred = CptPredictor(CptParams(0.726, 0.309))
        result = run_adversarial_index(pred, GdaConfig(seed=12), 12, 3)
        prov = result.candidate.provenance
        assert prov["procedure"] == "adversarial"
        assert prov["master_seed"] == 12 and prov["run_index"] == 3
        assert prov["iterations"] == 50


class TestEstimatedPredictors:
    """Generation runs against fitted models instead of the oracle."""

    def _training_data(self, n=800):
        from anomgen.cpt import simulate_choices
        menus = [sample_random_menu(np.random.default_rng((77, i)), 2, 0, 10)
                 for i in range(n)]
        return simulate_choices(np.random.default_rng(78), menus,
                                CptParams(0.726, 0.309), kind="rate", count=200)

    def test_mlp_backed_generation(self):
        from anomgen.predictor import MlpPredictor, MlpTrainConfig, train_mlp
        model = train_mlp(self._training_data(), hidden=(16, 16),
                          config=MlpTrainConfig(epochs=60, seed=0))
        pred = MlpPredictor(model)
        result = run_adversarial_index(pred, GdaConfig(seed=13), 13, 0)
        assert result.iterations == 50
        again = run_adversarial_index(pred, GdaConfig(seed=13), 13, 0)
        np.testing.assert_array_equal(result.candidate.menus[1].flatten(),
                                      again.candidate.menus[1].flatten())
        from anomgen.morphing import MorphConfig, run_morph_index
        morph = run_morph_index(pred, MorphConfig(seed=13), 13, 0)
        assert np.isfinite(morph.drift)

    def test_cpt_fit_backed_generation(self):
        from anomgen.predictor import cpt_fit_predictor
        pred = cpt_fit_predictor(self._training_data())
        result = run_adversarial_index(pred, GdaConfig(seed=14), 14, 0)
        assert result.iterations == 50
