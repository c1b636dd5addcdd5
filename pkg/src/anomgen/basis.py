"""Utility-function bases: rescaled polynomials and monotone I-splines.

Payoffs are affinely rescaled to [0, 1] before evaluation, which keeps
polynomial conditioning sane at order 6 and puts I-spline meshes on a fixed
unit interval.  I-splines follow Ramsay's construction: each member is the
integral of an M-spline, evaluated through the closed-form sum over M-splines
of one order higher.
"""

from __future__ import annotations

import numpy as np

DOMAIN_TOL = 1e-9


def _check_domain(z: np.ndarray, low: float, high: float) -> np.ndarray:
    if np.any(z < low - DOMAIN_TOL) or np.any(z > high + DOMAIN_TOL):
        raise ValueError(f"payoff outside basis domain [{low}, {high}]")
    return np.clip(z, low, high)


class PolynomialBasis:
    """(t, t^2, ..., t^K) on the rescaled coordinate t = (z - low)/(high - low)."""

    kind = "polynomial"

    def __init__(self, order: int = 6, domain=(0.0, 10.0)):
        if order < 1:
            raise ValueError("polynomial order must be >= 1")
        low, high = float(domain[0]), float(domain[1])
        if not high > low:
            raise ValueError("degenerate payoff domain")
        self.order = order
        self.domain = (low, high)

    @property
    def dim(self) -> int:
        return self.order

    def eval(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        low, high = self.domain
        t = (_check_domain(z, low, high) - low) / (high - low)
        powers = np.arange(1, self.order + 1)
        return t[:, None] ** powers[None, :]

    def deriv(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        low, high = self.domain
        t = (_check_domain(z, low, high) - low) / (high - low)
        powers = np.arange(1, self.order + 1)
        return powers[None, :] * t[:, None] ** (powers[None, :] - 1) / (high - low)

    def config_dict(self) -> dict:
        return {"kind": "polynomial", "order": self.order, "domain": list(self.domain)}


def _mspline_values(x: np.ndarray, knots: np.ndarray, order: int, want_deriv: bool):
    """All M-spline members of a given order on a knot sequence.

    Returns (M, dM) arrays of shape (len(knots) - order, len(x)); dM is None
    unless requested.  Intervals are half-open [t_i, t_{i+1}).
    """
    n1 = len(knots) - 1
    M = np.zeros((n1, x.size))
    for i in range(n1):
        ti, ti1 = knots[i], knots[i + 1]
        if ti1 > ti:
            M[i] = ((x >= ti) & (x < ti1)) / (ti1 - ti)
    dM = np.zeros_like(M) if want_deriv else None
    for k in range(2, order + 1):
        nk = len(knots) - k
        Mk = np.zeros((nk, x.size))
        dMk = np.zeros((nk, x.size)) if want_deriv else None
        for i in range(nk):
            span = knots[i + k] - knots[i]
            if span <= 0:
                continue
            c = k / ((k - 1) * span)
            left = x - knots[i]
            right = knots[i + k] - x
            Mk[i] = c * (left * M[i] + right * M[i + 1])
            if want_deriv:
                dMk[i] = c * (M[i] + left * dM[i] - M[i + 1] + right * dM[i + 1])
        M, dM = Mk, dMk
    return M, dM


class ISplineBasis:
    """Monotone I-spline family: q equally spaced mesh points, given degree.

    Members are nondecreasing, 0 at the domain low end and 1 at the high end;
    the family has q + degree - 2 members.
    """

    kind = "ispline"

    def __init__(self, knots: int = 10, degree: int = 3, domain=(0.0, 10.0)):
        if knots < 2:
            raise ValueError("need at least two mesh points")
        if degree < 1:
            raise ValueError("degree must be >= 1")
        low, high = float(domain[0]), float(domain[1])
        if not high > low:
            raise ValueError("degenerate payoff domain")
        self.n_knots = knots
        self.degree = degree
        self.domain = (low, high)
        mesh = np.linspace(0.0, 1.0, knots)
        k = degree
        # Order-(k+1) knot sequence used by the closed-form I-spline sum.
        self._knots = np.concatenate([np.zeros(k + 1), mesh[1:-1], np.ones(k + 1)])

    @property
    def dim(self) -> int:
        return self.n_knots + self.degree - 2

    def _eval(self, z, want_deriv: bool) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        low, high = self.domain
        t = (_check_domain(z, low, high) - low) / (high - low)
        k = self.degree
        knots = self._knots
        M, dM = _mspline_values(t, knots, k + 1, want_deriv)
        # 1-based index j with t_j <= x < t_{j+1}; at x = 1 it lands past every
        # interval, which the branching below turns into the exact value 1.
        j = np.searchsorted(knots, t, side="right")
        n = self.dim
        terms = M if not want_deriv else dM
        # Row m-1 holds the summand for member index m (1-based).
        summands = np.array(
            [(knots[m + k] - knots[m - 1]) * terms[m - 1] / (k + 1)
             for m in range(1, M.shape[0] + 1)]
        )
        out = np.zeros((z.size, n))
        at_flat = 1.0 if not want_deriv else 0.0
        for i in range(1, n + 1):
            include = (np.arange(1, M.shape[0] + 1)[:, None] >= i + 1) & \
                      (np.arange(1, M.shape[0] + 1)[:, None] <= j[None, :])
            sums = (summands * include).sum(axis=0)
            out[:, i - 1] = np.where(i > j, 0.0, np.where(i < j - k, at_flat, sums))
        if want_deriv:
            out /= (high - low)
        return out

    def eval(self, z) -> np.ndarray:
        return self._eval(z, want_deriv=False)

    def deriv(self, z) -> np.ndarray:
        return self._eval(z, want_deriv=True)

    def config_dict(self) -> dict:
        return {"kind": "ispline", "knots": self.n_knots, "degree": self.degree,
                "domain": list(self.domain)}


def basis_from_config(cfg: dict):
    """Build a basis from its JSON description."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    domain = tuple(cfg.pop("domain", (0.0, 10.0)))
    if kind == "polynomial":
        return PolynomialBasis(order=cfg.pop("order", 6), domain=domain)
    if kind == "ispline":
        return ISplineBasis(knots=cfg.pop("knots", 10), degree=cfg.pop("degree", 3),
                            domain=domain)
    raise ValueError(f"unknown basis kind {kind!r}")
