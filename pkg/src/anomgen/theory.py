"""Parametrized logit expected-utility theory.

With utility u_theta(z) = theta . b(z) linear in the basis, the expected
utility difference of a menu is linear in theta, so the theory's choice
probability is a logistic regression on the per-menu feature vector

    d(x) = sum_j p1_j b(z1_j) - sum_j p0_j b(z0_j).

Fitting cross-entropy over theta is therefore convex; the inner minimization
of the anomaly search reduces to small soft-label logistic regressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpt import logistic
from .lotteries import Menu

TARGET_CLIP = 1e-6
# Radius of the coefficient ball standing in for a compact parameter space.
# On the rescaled payoff domain this allows utility swings two orders beyond
# behaviorally plausible logits; anything larger lets exploding coefficients
# rationalize near-parallel conflicting menus and empties the parametrized
# class of content.
THETA_NORM_BOUND = 100.0


@dataclass(frozen=True)
class TheorySpec:
    """A basis, a coefficient vector and the logit noise scale."""

    basis: object
    theta: np.ndarray
    logit_scale: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.basis.dim,):
            raise ValueError(f"theta has shape {theta.shape}, basis dim {self.basis.dim}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("non-finite coefficient")
        object.__setattr__(self, "theta", theta)

    def utility(self, z) -> np.ndarray:
        return self.basis.eval(z) @ self.theta

    def utility_deriv(self, z) -> np.ndarray:
        return self.basis.deriv(z) @ self.theta


def eu_difference_features(basis, menu: Menu) -> np.ndarray:
    """d(x): basis-weighted expected-utility difference feature vector."""
    b1 = basis.eval(menu.lottery1.payoffs)
    b0 = basis.eval(menu.lottery0.payoffs)
    return menu.lottery1.probs @ b1 - menu.lottery0.probs @ b0


def design_matrix(basis, menus) -> np.ndarray:
    return np.array([eu_difference_features(basis, m) for m in menus])


def theory_choice_prob(spec: TheorySpec, menu: Menu) -> float:
    d = eu_difference_features(spec.basis, menu)
    return float(logistic(spec.logit_scale * (d @ spec.theta)))


def _clip_targets(y: np.ndarray) -> np.ndarray:
    return np.clip(y, TARGET_CLIP, 1.0 - TARGET_CLIP)


def _cross_entropy(u: np.ndarray, y: np.ndarray) -> float:
    """Mean CE of logits u against soft targets y, stable for large |u|."""
    # -y*log(sigma(u)) - (1-y)*log(1-sigma(u)) = softplus(u) - y*u
    softplus = np.logaddexp(0.0, u)
    return float(np.mean(softplus - y * u))


def target_entropy(y: np.ndarray) -> float:
    y = _clip_targets(np.asarray(y, dtype=float))
    return float(np.mean(-y * np.log(y) - (1 - y) * np.log(1 - y)))


@dataclass
class FitResult:
    theta: np.ndarray
    kl: float
    cross_entropy: float
    converged: bool = True
    on_norm_bound: bool = False


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 5
    init_scale: float = 0.1
    max_iter: int = 300
    grad_tol: float = 1e-11
    seed: int = 0


def _fit_logits(D: np.ndarray, y: np.ndarray, scale: float, cfg: FitConfig,
                warm_start=None) -> FitResult:
    """Minimize mean CE of sigma(scale * D theta) against targets y.

    Backtracking gradient descent from several starts.  The problem is convex,
    so restarts guard numerics rather than local minima; an exact-interpolation
    least-squares start short-circuits the common fittable case.
    """
    n, dim = D.shape
    y = _clip_targets(y)
    entropy = target_entropy(y)

    def ce(theta):
        return _cross_entropy(scale * (D @ theta), y)

    def grad(theta):
        f = logistic(scale * (D @ theta))
        return scale * ((f - y) @ D) / n

    # Interpolating start: if D theta = logit(y)/scale is solvable the CE lower
    # bound (target entropy) is attained and no search is needed.
    c = np.log(y / (1 - y)) / scale
    theta_ls, *_ = np.linalg.lstsq(D, c, rcond=None)
    if np.linalg.norm(theta_ls) > THETA_NORM_BOUND:
        theta_ls = theta_ls * (THETA_NORM_BOUND / np.linalg.norm(theta_ls))
    if ce(theta_ls) - entropy < 1e-12:
        return FitResult(theta_ls, max(ce(theta_ls) - entropy, 0.0), ce(theta_ls))

    rng = np.random.default_rng(cfg.seed)
    starts = [theta_ls, np.zeros(dim)]
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))
    starts += [rng.normal(0.0, cfg.init_scale, size=dim) for _ in range(cfg.restarts)]

    best = None
    for theta0 in starts:
        theta = theta0.copy()
        value = ce(theta)
        step = 1.0
        converged = False
        for _ in range(cfg.max_iter):
            g = grad(theta)
            gnorm = np.linalg.norm(g)
            if gnorm < cfg.grad_tol:
                converged = True
                break
            # Backtracking line search with Armijo condition.
            while step > 1e-14:
                cand = theta - step * g
                cand_norm = np.linalg.norm(cand)
                if cand_norm > THETA_NORM_BOUND:
                    cand = cand * (THETA_NORM_BOUND / cand_norm)
                cand_value = ce(cand)
                if cand_value <= value - 1e-4 * step * gnorm ** 2:
                    theta, value = cand, cand_value
                    step = min(step * 2.0, 1e6)
                    break
                step *= 0.5
            else:
                break
        result = FitResult(theta, max(value - entropy, 0.0), value, converged,
                           on_norm_bound=np.linalg.norm(theta) >= THETA_NORM_BOUND - 1e-9)
        if best is None or result.cross_entropy < best.cross_entropy:
            best = result
    return best


def fit_theta(basis, examples, cfg: FitConfig | None = None, scale: float = 1.0,
              warm_start=None) -> FitResult:
    """Fit theta to (menu, target probability) pairs by mean cross-entropy.

    The reported loss is the mean KL divergence of the fit from the targets,
    which is 0 exactly when the theory matches them.
    """
    if not examples:
        raise ValueError("need at least one example")
    cfg = cfg or FitConfig()
    menus = [m for m, _ in examples]
    y = np.array([t for _, t in examples], dtype=float)
    D = design_matrix(basis, menus)
    return _fit_logits(D, y, scale, cfg, warm_start)


def min_theory_loss(basis, examples, restarts: int = 5, scale: float = 1.0) -> FitResult:
    """Multi-restart wrapper over fit_theta; returns the best fit found."""
    return fit_theta(basis, examples, FitConfig(restarts=restarts), scale)


def theory_loss(spec: TheorySpec, examples) -> tuple[float, float]:
    """(mean cross-entropy, mean KL) of a spec on (menu, target) examples."""
    menus = [m for m, _ in examples]
    y = _clip_targets(np.array([t for _, t in examples], dtype=float))
    D = design_matrix(spec.basis, menus)
    u = spec.logit_scale * (D @ spec.theta)
    ce = _cross_entropy(u, y)
    return ce, max(ce - target_entropy(y), 0.0)


def eu_difference_grad(spec: TheorySpec, menu: Menu) -> np.ndarray:
    """Gradient of the expected-utility difference over (z0, p0, z1, p1)."""
    z0, p0 = menu.lottery0.payoffs, menu.lottery0.probs
    z1, p1 = menu.lottery1.payoffs, menu.lottery1.probs
    u0, u1 = spec.utility(z0), spec.utility(z1)
    du0, du1 = spec.utility_deriv(z0), spec.utility_deriv(z1)
    return np.concatenate([-p0 * du0, -u0, p1 * du1, u1])


def theory_loss_grad_features(spec: TheorySpec, examples) -> list:
    """Per-menu gradient of the mean cross-entropy over flattened coordinates.

    Targets are treated as data, so the gradient vanishes at an exact fit
    (the vanishing-gradient regime that motivates the logit ascent objective).
    """
    n = len(examples)
    grads = []
    for menu, target in examples:
        d = eu_difference_features(spec.basis, menu)
        f = logistic(spec.logit_scale * (d @ spec.theta))
        y = float(np.clip(target, TARGET_CLIP, 1 - TARGET_CLIP))
        grads.append(spec.logit_scale * (f - y) * eu_difference_grad(spec, menu) / n)
    return grads
