"""Example morphing: move menus along directions the theory cannot see.

At each step the predictor's probability-gradient is projected onto the
(approximate) common null space of sampled theory gradients and the menu is
stepped against that projection.  The theory gradients come from coefficient
vectors drawn around the running history of inner fits; directions they pin
down are removed, directions they leave free carry the morph.  The projected
step is always a descent direction for the predictor and is orthogonal to
every sampled gradient retained by the rank cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversarial import interior_menu
from .basis import basis_from_config
from .cpt import logistic
from .lotteries import (Example, ExampleCollection, Menu, menu_from_flat,
                        project_to_simplex, run_rng, sample_random_menu)
from .theory import FitConfig, fit_theta

DEFAULT_BASIS = {"kind": "ispline", "knots": 10, "degree": 3, "domain": [0.0, 10.0]}
STOP_NORM = 1e-8
COV_JITTER = 1e-8
SINGLE_POINT_SIGMA = 0.1


@dataclass(frozen=True)
class MorphConfig:
    step_size: float = 10.0
    max_iters: int = 50
    n_gradient_samples: int = 2_000     # paper-scale runs use 200,000
    # Rank cutoff separating genuinely pinned directions from covariance
    # jitter.  Early-iteration sampled-gradient spectra have second singular
    # values up to ~2e-3 of the first from jitter alone, so cutoffs below
    # ~1e-2 treat the span as full-rank and stall every run at step 0.
    rank_tol: float = 0.1
    basis_config: dict = field(default_factory=lambda: dict(DEFAULT_BASIS))
    n_payoffs: int = 2
    logit_scale: float = 1.0
    fit_restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0 or self.n_gradient_samples < 1:
            raise ValueError("step size must be positive and sample count >= 1")

    def make_basis(self):
        return basis_from_config(self.basis_config)


def sample_theta_history(history, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw coefficient vectors around the running fit history.

    Mean and sample covariance of the history, with an isotropic fallback for
    a single entry and a small jitter keeping the covariance factorizable.
    """
    H = np.atleast_2d(np.array(history, dtype=float))
    if H.shape[0] < 1:
        raise ValueError("history must contain at least one fit")
    mean = H.mean(axis=0)
    dim = H.shape[1]
    if H.shape[0] == 1:
        cov = SINGLE_POINT_SIGMA ** 2 * np.eye(dim)
    else:
        cov = np.cov(H, rowvar=False, ddof=1)
    cov = cov + COV_JITTER * np.eye(dim)
    return rng.multivariate_normal(mean, cov, size=count, method="cholesky")


def null_space_projection(g_star: np.ndarray, sampled_grads: np.ndarray,
                          rank_tol: float = 1e-6) -> np.ndarray:
    """Project g_star onto the orthogonal complement of the sampled span.

    The span is computed by SVD with singular values below ``rank_tol`` times
    the largest treated as zero; gradients with norm below ``rank_tol`` are
    dropped before the decomposition.  Full-span input maps to the zero vector.
    """
    g_star = np.asarray(g_star, dtype=float)
    G = np.atleast_2d(np.asarray(sampled_grads, dtype=float))
    if G.shape[1] != g_star.size:
        raise ValueError("dimension mismatch between gradient and samples")
    norms = np.linalg.norm(G, axis=1)
    G = G[norms > rank_tol]
    if G.shape[0] == 0:
        return g_star.copy()
    _, svals, Vt = np.linalg.svd(G, full_matrices=False)
    keep = svals > rank_tol * svals[0]
    V = Vt[keep]
    return g_star - V.T @ (V @ g_star)


def _tangent(vecs: np.ndarray, n_payoffs: int) -> np.ndarray:
    """Remove per-block means: feasible simplex directions sum to zero."""
    J = n_payoffs
    out = np.atleast_2d(vecs).astype(float).copy()
    out[:, :J] -= out[:, :J].mean(axis=1, keepdims=True)
    out[:, J:] -= out[:, J:].mean(axis=1, keepdims=True)
    return out if np.asarray(vecs).ndim > 1 else out[0]


@dataclass
class MorphRunResult:
    candidate: ExampleCollection
    trajectory: list
    iterations: int
    drift: float                      # max sampled-theory movement seen
    flags: list = field(default_factory=list)


def morph_step_direction(pred_grad_probs: np.ndarray, sampled_grads_probs: np.ndarray,
                         n_payoffs: int, rank_tol: float) -> np.ndarray:
    """Null-space projection restricted to simplex-tangent coordinates."""
    g_t = _tangent(pred_grad_probs, n_payoffs)
    G_t = _tangent(sampled_grads_probs, n_payoffs)
    return null_space_projection(g_t, G_t, rank_tol)


def _prob_vector(x_flat: np.ndarray, J: int) -> np.ndarray:
    return np.concatenate([x_flat[J:2 * J], x_flat[3 * J:]])


def _with_probs(x_flat: np.ndarray, J: int, probs: np.ndarray) -> np.ndarray:
    out = x_flat.copy()
    out[J:2 * J] = project_to_simplex(probs[:J])
    out[3 * J:] = project_to_simplex(probs[J:])
    return out


def morph_run(predictor, config: MorphConfig, x0: Menu,
              provenance: dict | None = None,
              rng: np.random.Generator | None = None) -> MorphRunResult:
    """One morphing run; stops early once the projected direction vanishes."""
    basis = config.make_basis()
    J = x0.n_payoffs
    rng = rng or np.random.default_rng(config.seed)
    fit_cfg = FitConfig(restarts=config.fit_restarts)
    flags: list = []

    f0 = predictor.predict(x0)
    seed_fit = fit_theta(basis, [(x0, f0)], fit_cfg, scale=config.logit_scale)
    history = [seed_fit.theta]

    # Payoffs are frozen, so the basis values at each payoff are fixed.
    B0 = basis.eval(x0.lottery0.payoffs)            # (J, K)
    B1 = basis.eval(x0.lottery1.payoffs)
    p0_init = np.concatenate([x0.lottery0.probs, x0.lottery1.probs])

    x = x0.flatten()
    trajectory = [x.copy()]
    warm = seed_fit.theta
    drift = 0.0
    iterations = 0
    for s in range(config.max_iters):
        menu = menu_from_flat(x, J)
        fit = fit_theta(basis, [(x0, f0), (menu, predictor.predict(menu))],
                        fit_cfg, scale=config.logit_scale, warm_start=warm)
        warm = fit.theta
        history.append(fit.theta)

        thetas = sample_theta_history(history, config.n_gradient_samples, rng)
        p = _prob_vector(x, J)
        U0 = thetas @ B0.T                           # (B, J) utilities
        U1 = thetas @ B1.T
        dvals = U1 @ menu.lottery1.probs - U0 @ menu.lottery0.probs
        fb = logistic(config.logit_scale * dvals)
        slope = config.logit_scale * fb * (1.0 - fb)
        sampled = slope[:, None] * np.concatenate([-U0, U1], axis=1)

        # Representational drift of the sampled theories between x^0 and x^s.
        dvals0 = U1 @ p0_init[J:] - U0 @ p0_init[:J]
        drift = max(drift, float(np.max(np.abs(
            logistic(config.logit_scale * dvals) -
            logistic(config.logit_scale * dvals0)))))

        pred_grad = predictor.grad(interior_menu(menu))
        pred_grad_probs = np.concatenate([pred_grad[J:2 * J], pred_grad[3 * J:]])
        if not np.all(np.isfinite(pred_grad_probs)):
            flags.append(f"nonfinite_gradient@iter{s}")
            break
        direction = morph_step_direction(pred_grad_probs, sampled, J, config.rank_tol)
        if np.linalg.norm(direction) < STOP_NORM:
            break
        x = _with_probs(x, J, p - config.step_size * direction)
        trajectory.append(x.copy())
        iterations = s + 1

    final = menu_from_flat(x, J)
    prov = dict(provenance or {})
    prov.setdefault("procedure", "morphing")
    prov["iterations"] = iterations
    prov["drift"] = drift
    if flags:
        prov["flags"] = list(flags)
    examples = (Example(x0, f0), Example(final, predictor.predict(final)))
    return MorphRunResult(candidate=ExampleCollection(examples, prov),
                          trajectory=trajectory, iterations=iterations,
                          drift=drift, flags=flags)


def generate_morphs(predictor, config: MorphConfig, num_inits: int,
                    master_seed: int | None = None) -> list:
    """Independent seeded morph runs, deterministic in the run index."""
    if num_inits < 1:
        raise ValueError("need at least one initialization")
    seed = config.seed if master_seed is None else master_seed
    domain = config.make_basis().domain
    return [run_morph_index(predictor, config, seed, i, domain)
            for i in range(num_inits)]


def run_morph_index(predictor, config: MorphConfig, master_seed: int,
                    run_index: int, domain=None) -> MorphRunResult:
    domain = domain or config.make_basis().domain
    rng = run_rng(master_seed, run_index)
    x0 = sample_random_menu(rng, config.n_payoffs, domain[0], domain[1])
    prov = {"procedure": "morphing", "master_seed": master_seed,
            "run_index": run_index}
    return morph_run(predictor, config, x0, prov, rng)
