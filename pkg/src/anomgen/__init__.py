"""Anomaly generation for expected utility theory from predictive choice models."""

from .lotteries import (Example, ExampleCollection, FosdOrder, Lottery, Menu,
                        fosd_compare, lottery_stats, make_lottery,
                        project_to_simplex, sample_random_menu)
from .cpt import CptParams, CptPredictor, choice_prob, cpt_value, prob_weights
from .basis import ISplineBasis, PolynomialBasis, basis_from_config
from .theory import TheorySpec, fit_theta, min_theory_loss, theory_choice_prob
from .verifier import (VerificationResult, is_anomaly, verify_increasing_utility,
                       verify_parametrized)
from .categorize import (AnomalyCategory, categorize, categorize_three_payoff,
                         categorize_two_payoff, check_certificate,
                         decompose_shared_components, solve_degenerate_mix)
from .adversarial import GdaConfig, gda_run, generate_adversarial
from .morphing import MorphConfig, generate_morphs, morph_run, null_space_projection

__all__ = [name for name in dir() if not name.startswith("_")]
