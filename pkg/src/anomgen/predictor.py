"""Predictive choice models: a from-scratch MLP and a parametric CPT fit.

Both expose the same handle surface as the closed-form oracle: ``predict(menu)``
returning a probability in (0, 1) and ``grad(menu)`` returning the gradient
over the flattened menu coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cpt import CptParams, CptPredictor, logistic
from .data import ChoiceDataset
from .lotteries import Menu

TARGET_CLIP = 1e-6


# ---------------------------------------------------------------------------
# Multilayer perceptron
# ---------------------------------------------------------------------------

class MlpModel:
    """ReLU hidden layers, logistic output, fixed per-input scaling."""

    def __init__(self, widths, weights, biases, input_scaling):
        self.widths = list(widths)
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.input_scaling = np.asarray(input_scaling, dtype=float)
        if self.widths[-1] != 1:
            raise ValueError("output layer must have width 1")
        if len(self.weights) != len(self.widths) - 1:
            raise ValueError("weight count does not match layer count")
        for l, W in enumerate(self.weights):
            if W.shape != (self.widths[l], self.widths[l + 1]):
                raise ValueError(f"layer {l} weight shape {W.shape} inconsistent")
            if self.biases[l].shape != (self.widths[l + 1],):
                raise ValueError(f"layer {l} bias shape inconsistent")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(self.biases[l]))):
                raise ValueError("non-finite parameter")
        if self.input_scaling.shape != (self.widths[0],):
            raise ValueError("input scaling length mismatch")

    @classmethod
    def init_random(cls, widths, input_scaling, seed: int = 0) -> "MlpModel":
        """Symmetric uniform init, a = sqrt(6 / (fan_in + fan_out))."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(widths, weights, biases, input_scaling)

    def copy(self) -> "MlpModel":
        return MlpModel(self.widths, [W.copy() for W in self.weights],
                        [b.copy() for b in self.biases], self.input_scaling.copy())

    def forward(self, X: np.ndarray, keep: bool = False):
        """Logits for a batch of scaled inputs; optionally keep activations."""
        acts = [X]
        h = X
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if l < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
            if keep:
                acts.append(h)
        logits = h[:, 0]
        return (logits, acts) if keep else logits

    def predict_batch(self, X_raw: np.ndarray) -> np.ndarray:
        return logistic(self.forward(X_raw * self.input_scaling))

    def to_json_dict(self) -> dict:
        return {
            "widths": self.widths,
            "weights": [W.ravel().tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_scaling": self.input_scaling.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MlpModel":
        widths = d["widths"]
        weights = [np.array(w).reshape(widths[l], widths[l + 1])
                   for l, w in enumerate(d["weights"])]
        return cls(widths, weights, [np.array(b) for b in d["biases"]],
                   np.array(d["input_scaling"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def menu_input_scaling(n_payoffs: int, payoff_scale: float = 10.0) -> np.ndarray:
    """Divide payoff coordinates by the sampling range so inputs lie in [0, 1]."""
    J = n_payoffs
    s = np.ones(4 * J)
    s[:J] = 1.0 / payoff_scale
    s[2 * J:3 * J] = 1.0 / payoff_scale
    return s


def _ce_loss(logits: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    yc = np.clip(y, TARGET_CLIP, 1 - TARGET_CLIP)
    return float(np.average(np.logaddexp(0.0, logits) - yc * logits, weights=w))


def _backprop(model: MlpModel, X: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Mean-CE gradients for all weights and biases on a scaled batch."""
    logits, acts = model.forward(X, keep=True)
    f = logistic(logits)
    wn = w / w.sum()
    delta = ((f - np.clip(y, TARGET_CLIP, 1 - TARGET_CLIP)) * wn)[:, None]
    gW, gb = [None] * len(model.weights), [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        inputs = acts[l]
        gW[l] = inputs.T @ delta
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ model.weights[l].T
            delta[acts[l] <= 0.0] = 0.0
    return gW, gb


@dataclass(frozen=True)
class MlpTrainConfig:
    batch_size: int = 256
    epochs: int = 500
    step_size: float = 0.5
    seed: int = 0


def train_mlp(train: ChoiceDataset, hidden=(32, 32),
              config: MlpTrainConfig | None = None,
              payoff_scale: float = 10.0) -> MlpModel:
    """Mini-batch gradient descent on mean cross-entropy with soft labels.

    The full-set loss is monitored each epoch; an epoch that raises it is
    rolled back and the step size halved, so the recorded loss path is
    non-increasing.  Divergence (non-finite loss) aborts with diagnostics.
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    cfg = config or MlpTrainConfig()
    J = train.n_payoffs
    X_raw = np.array([r.menu.flatten() for r in train])
    y = train.outcomes()
    w = np.array([r.weight for r in train])
    scaling = menu_input_scaling(J, payoff_scale)
    X = X_raw * scaling
    widths = [4 * J, *hidden, 1]
    model = MlpModel.init_random(widths, scaling, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)

    step = cfg.step_size
    prev_loss = _ce_loss(model.forward(X), y, w)
    snapshot = model.copy()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        for start in range(0, len(train), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            gW, gb = _backprop(model, X[idx], y[idx], w[idx])
            for l in range(len(model.weights)):
                model.weights[l] -= step * gW[l]
                model.biases[l] -= step * gb[l]
        loss = _ce_loss(model.forward(X), y, w)
        if not np.isfinite(loss):
            raise RuntimeError(
                f"training diverged at epoch {epoch} (step size {step}); "
                "lower the step size")
        if loss > prev_loss + 1e-12:
            model = snapshot.copy()
            step *= 0.5
        else:
            prev_loss = loss
            snapshot = model.copy()
    return model


def mlp_predict(model: MlpModel, menu: Menu) -> float:
    x = menu.flatten()
    if x.size != model.widths[0]:
        raise ValueError("menu dimension does not match model input layer")
    return float(model.predict_batch(x[None, :])[0])


def mlp_grad(model: MlpModel, menu: Menu) -> np.ndarray:
    """Gradient of the predicted probability over raw menu coordinates."""
    x = menu.flatten()
    if x.size != model.widths[0]:
        raise ValueError("menu dimension does not match model input layer")
    X = (x * model.input_scaling)[None, :]
    logits, acts = model.forward(X, keep=True)
    f = logistic(logits[0])
    delta = np.ones((1, 1))
    for l in range(len(model.weights) - 1, 0, -1):
        delta = delta @ model.weights[l].T
        delta[acts[l] <= 0.0] = 0.0
    dx_scaled = (delta @ model.weights[0].T)[0]
    return f * (1.0 - f) * dx_scaled * model.input_scaling


class MlpPredictor:
    def __init__(self, model: MlpModel, label: str = "mlp"):
        self.model = model
        self.label = label

    def predict(self, menu: Menu) -> float:
        return mlp_predict(self.model, menu)

    def grad(self, menu: Menu) -> np.ndarray:
        return mlp_grad(self.model, menu)


# ---------------------------------------------------------------------------
# Parametric probability-weighting fit
# ---------------------------------------------------------------------------

def _cpt_value_batch(Z, P, delta, gamma):
    """Vectorized lottery values plus derivatives in (delta, gamma)."""
    W = np.where(P > 0.0, np.power(np.clip(P, 1e-300, None), gamma), 0.0)
    logP = np.where(P > 0.0, np.log(np.clip(P, 1e-300, None)), 0.0)
    Wp = W * logP                      # dW/dgamma
    T = W.sum(axis=1, keepdims=True)
    Tp = Wp.sum(axis=1, keepdims=True)
    D = delta * W + (T - W)
    Dp = delta * Wp + (Tp - Wp)
    safe = np.where(D > 0.0, D, 1.0)
    pi = np.where(D > 0.0, delta * W / safe, 0.0)
    dpi_ddelta = np.where(D > 0.0, W * (T - W) / safe ** 2, 0.0)
    dpi_dgamma = np.where(D > 0.0, delta * (Wp * D - W * Dp) / safe ** 2, 0.0)
    V = (pi * Z).sum(axis=1)
    return V, (dpi_ddelta * Z).sum(axis=1), (dpi_dgamma * Z).sum(axis=1)


@dataclass(frozen=True)
class CptFit:
    params: CptParams
    cross_entropy: float
    converged: bool


def fit_cpt_params(ds: ChoiceDataset, scale: float = 1.0,
                   max_iter: int = 500, grad_tol: float = 1e-9) -> CptFit:
    """Max-likelihood probability-weighting parameters.

    Gradient descent with backtracking over (log delta, log gamma) from a few
    fixed starts; analytic gradients throughout.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    Z0, P0, Z1, P1, y = ds.arrays()
    yc = np.clip(y, TARGET_CLIP, 1 - TARGET_CLIP)
    n = len(ds)

    def loss_grad(log_params):
        delta, gamma = np.exp(log_params)
        V0, dV0_dd, dV0_dg = _cpt_value_batch(Z0, P0, delta, gamma)
        V1, dV1_dd, dV1_dg = _cpt_value_batch(Z1, P1, delta, gamma)
        u = scale * (V1 - V0)
        ce = float(np.mean(np.logaddexp(0.0, u) - yc * u))
        resid = (logistic(u) - yc) * scale
        g_delta = float(np.mean(resid * (dV1_dd - dV0_dd))) * delta
        g_gamma = float(np.mean(resid * (dV1_dg - dV0_dg))) * gamma
        return ce, np.array([g_delta, g_gamma])

    best = None
    for start in (np.zeros(2), np.log([0.7, 0.35]), np.log([1.1, 0.45])):
        x = start.copy()
        value, g = loss_grad(x)
        step = 1.0
        converged = False
        for _ in range(max_iter):
            gnorm = np.linalg.norm(g)
            if gnorm < grad_tol:
                converged = True
                break
            while step > 1e-14:
                cand = x - step * g
                cand_value, cand_g = loss_grad(cand)
                if cand_value <= value - 1e-4 * step * gnorm ** 2:
                    x, value, g = cand, cand_value, cand_g
                    step = min(step * 2.0, 1e3)
                    break
                step *= 0.5
            else:
                break
        if best is None or value < best[1]:
            best = (x, value, converged)
    x, value, converged = best
    delta, gamma = np.exp(x)
    return CptFit(CptParams(float(delta), float(gamma)), value, converged)


def cpt_fit_predictor(ds: ChoiceDataset, scale: float = 1.0) -> CptPredictor:
    fit = fit_cpt_params(ds, scale=scale)
    return CptPredictor(fit.params, scale=scale,
                        label=f"cpt-fit({fit.params.delta:.3f},{fit.params.gamma:.3f})")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def evaluate(handle, ds: ChoiceDataset) -> dict:
    """Mean squared error and mean cross-entropy of a handle on a dataset."""
    if len(ds) == 0:
        raise ValueError("empty dataset")
    y = ds.outcomes()
    if isinstance(handle, MlpPredictor):
        X = np.array([r.menu.flatten() for r in ds])
        preds = handle.model.predict_batch(X)
    else:
        preds = np.array([handle.predict(r.menu) for r in ds])
    yc = np.clip(y, TARGET_CLIP, 1 - TARGET_CLIP)
    pc = np.clip(preds, TARGET_CLIP, 1 - TARGET_CLIP)
    ce = float(np.mean(-yc * np.log(pc) - (1 - yc) * np.log(1 - pc)))
    return {"mse": float(np.mean((preds - y) ** 2)), "cross_entropy": ce}
