"""Gradient descent-ascent search for collections the theory cannot fit.

Each run evolves menu probabilities against the best-responding logit-EUT
fit: the inner minimization refits theta, the outer step ascends a
disagreement objective, and every iterate is projected back onto the simplex.
A run emits the (initial, final) menu pair with the predictor's choice
probabilities attached; the verifier decides what counts as an anomaly.

Raw cross-entropy ascent stalls wherever the theory fits the current
collection exactly (the gradient vanishes with the residual), so the default
objective ascends the negated product of the predictor's log-odds and the
theory's expected-utility difference, which stays informative at exact fits.
The product is negated so that the score is positive exactly when the
best-fit utility ranks the lotteries against the predictor's majority choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import basis_from_config
from .lotteries import (Example, ExampleCollection, Menu, menu_from_flat,
                        project_to_simplex, run_rng, sample_random_menu)
from .theory import (FitConfig, TheorySpec, eu_difference_features,
                     eu_difference_grad, fit_theta, theory_loss,
                     theory_loss_grad_features)

INTERIOR_EPS = 1e-8
DEFAULT_BASIS = {"kind": "polynomial", "order": 6, "domain": [0.0, 10.0]}


@dataclass(frozen=True)
class GdaConfig:
    step_size: float = 0.01
    max_iters: int = 50
    basis_config: dict = field(default_factory=lambda: dict(DEFAULT_BASIS))
    objective: str = "logit_disagreement"       # or "raw_loss"
    ascent_coords: str = "probabilities_only"   # or "all"
    collection_mode: str = "pair_anchored"      # or "free"
    free_size: int = 2
    n_payoffs: int = 2
    logit_scale: float = 1.0
    fit_restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0 or self.max_iters < 1:
            raise ValueError("step size must be positive and iterations >= 1")
        if self.objective not in ("raw_loss", "logit_disagreement"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.ascent_coords not in ("probabilities_only", "all"):
            raise ValueError(f"unknown ascent coordinates {self.ascent_coords!r}")
        if self.collection_mode not in ("pair_anchored", "free"):
            raise ValueError(f"unknown collection mode {self.collection_mode!r}")

    def make_basis(self):
        return basis_from_config(self.basis_config)


def interior_menu(menu: Menu, eps: float = INTERIOR_EPS) -> Menu:
    """Clamp probabilities away from the simplex boundary for differentiation."""
    def fix(lot):
        p = np.clip(lot.probs, eps, 1.0 - eps)
        return type(lot)(lot.payoffs, p / p.sum())
    return Menu(fix(menu.lottery0), fix(menu.lottery1))


def ascent_objective(kind: str, predictor, spec: TheorySpec, menu: Menu):
    """(value, gradient over flattened coordinates) of the outer objective."""
    if kind == "raw_loss":
        target = predictor.predict(menu)
        ce, _ = theory_loss(spec, [(menu, target)])
        grad = theory_loss_grad_features(spec, [(menu, target)])[0]
        return ce, grad
    if kind == "logit_disagreement":
        safe = interior_menu(menu)
        f = float(np.clip(predictor.predict(safe), 1e-12, 1 - 1e-12))
        m = np.log(f / (1.0 - f))
        g = float(eu_difference_features(spec.basis, menu) @ spec.theta)
        grad_m = predictor.grad(safe) / (f * (1.0 - f))
        grad_g = eu_difference_grad(spec, safe)
        return -m * g, -(g * grad_m + m * grad_g)
    raise ValueError(f"unknown objective {kind!r}")


def _mask_coords(grad: np.ndarray, n_payoffs: int, coords: str) -> np.ndarray:
    if coords == "all":
        return grad
    J = n_payoffs
    out = grad.copy()
    out[:J] = 0.0
    out[2 * J:3 * J] = 0.0
    return out


def _feasible(x: np.ndarray, n_payoffs: int, domain) -> np.ndarray:
    """Project probability blocks to the simplex, clamp payoffs to the domain."""
    J = n_payoffs
    out = x.copy()
    out[:J] = np.clip(out[:J], domain[0], domain[1])
    out[2 * J:3 * J] = np.clip(out[2 * J:3 * J], domain[0], domain[1])
    out[J:2 * J] = project_to_simplex(out[J:2 * J])
    out[3 * J:] = project_to_simplex(out[3 * J:])
    return out


@dataclass
class GdaRunResult:
    candidate: ExampleCollection
    trajectory: list
    iterations: int
    flags: list = field(default_factory=list)


def gda_run(predictor, config: GdaConfig, x0, provenance: dict | None = None) -> GdaRunResult:
    """One descent-ascent run.

    ``x0`` is the initial menu; free mode instead takes a sequence of
    ``free_size`` initial menus that evolve jointly.
    """
    basis = config.make_basis()
    domain = basis.domain
    fit_cfg = FitConfig(restarts=config.fit_restarts)
    flags = []

    if config.collection_mode == "pair_anchored":
        if not isinstance(x0, Menu):
            raise TypeError("pair_anchored mode expects a single initial menu")
        anchor = x0
        moving = [x0.flatten()]
    else:
        inits = [x0] if isinstance(x0, Menu) else list(x0)
        if len(inits) != config.free_size:
            raise ValueError(f"free mode expects {config.free_size} initial menus")
        anchor = None
        moving = [m.flatten() for m in inits]
    J = (anchor or inits[0]).n_payoffs

    warm = None
    trajectory = [[m.copy() for m in moving]]
    iterations = 0
    for s in range(config.max_iters):
        menus = ([anchor] if anchor is not None else []) + \
                [menu_from_flat(x, J) for x in moving]
        examples = [(m, predictor.predict(m)) for m in menus]
        fit = fit_theta(basis, examples, fit_cfg, scale=config.logit_scale,
                        warm_start=warm)
        warm = fit.theta
        spec = TheorySpec(basis, fit.theta, config.logit_scale)

        new_moving = []
        bad = False
        for x in moving:
            menu = menu_from_flat(x, J)
            _, grad = ascent_objective(config.objective, predictor, spec, menu)
            grad = _mask_coords(grad, J, config.ascent_coords)
            if not np.all(np.isfinite(grad)):
                flags.append(f"nonfinite_gradient@iter{s}")
                bad = True
                break
            new_moving.append(_feasible(x + config.step_size * grad, J, domain))
        if bad:
            break
        moving = new_moving
        trajectory.append([m.copy() for m in moving])
        iterations = s + 1

    if anchor is not None:
        menus_out = [anchor, menu_from_flat(moving[0], J)]
    else:
        menus_out = [menu_from_flat(x, J) for x in moving]
    prov = dict(provenance or {})
    prov.setdefault("procedure", "adversarial")
    prov["iterations"] = iterations
    if flags:
        prov["flags"] = list(flags)
    examples = tuple(Example(m, predictor.predict(m)) for m in menus_out)
    return GdaRunResult(candidate=ExampleCollection(examples, prov),
                        trajectory=trajectory, iterations=iterations, flags=flags)


def generate_adversarial(predictor, config: GdaConfig, num_inits: int,
                         master_seed: int | None = None) -> list:
    """Independent seeded runs; output order is deterministic in the run index."""
    if num_inits < 1:
        raise ValueError("need at least one initialization")
    seed = config.seed if master_seed is None else master_seed
    domain = config.make_basis().domain
    results = []
    for i in range(num_inits):
        results.append(run_adversarial_index(predictor, config, seed, i, domain))
    return results


def run_adversarial_index(predictor, config: GdaConfig, master_seed: int,
                          run_index: int, domain=None) -> GdaRunResult:
    """Single run addressed by (master seed, run index); worker-pool friendly."""
    domain = domain or config.make_basis().domain
    rng = run_rng(master_seed, run_index)
    if config.collection_mode == "free":
        x0 = [sample_random_menu(rng, config.n_payoffs, domain[0], domain[1])
              for _ in range(config.free_size)]
    else:
        x0 = sample_random_menu(rng, config.n_payoffs, domain[0], domain[1])
    prov = {"procedure": "adversarial", "master_seed": master_seed,
            "run_index": run_index}
    return gda_run(predictor, config, x0, prov)
