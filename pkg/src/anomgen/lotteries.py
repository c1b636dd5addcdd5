"""Lotteries, menus and simplex arithmetic.

A menu is a pair of lotteries over J monetary payoffs.  Everything downstream
(choice models, the anomaly search, verification) runs over the canonical
flattened coordinate vector ``(z0, p0, z1, p1)`` of length 4J.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Payoffs closer than this are treated as the same monetary amount.
PAYOFF_MERGE_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Lottery:
    """A finite lottery: payoff vector and matching probability vector."""

    payoffs: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "payoffs", _readonly(self.payoffs))
        object.__setattr__(self, "probs", _readonly(self.probs))
        if self.payoffs.ndim != 1 or self.payoffs.shape != self.probs.shape:
            raise ValueError("payoffs and probs must be 1-d vectors of equal length")
        if self.payoffs.size < 1:
            raise ValueError("lottery needs at least one payoff")
        if not np.all(np.isfinite(self.payoffs)):
            raise ValueError("non-finite payoff")
        if np.any(self.probs < -PAYOFF_MERGE_TOL):
            raise ValueError("negative probability")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {self.probs.sum()}, not 1")

    @property
    def size(self) -> int:
        return self.payoffs.size

    def to_json_dict(self) -> dict:
        return {"payoffs": self.payoffs.tolist(), "probs": self.probs.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Lottery":
        return make_lottery(d["payoffs"], d["probs"])


def make_lottery(payoffs, probs) -> Lottery:
    """Validate and build a lottery, renormalizing probabilities exactly.

    The probability vector may be off the simplex by at most 1e-6; it is
    rescaled by its sum so the stored vector sums to 1.
    """
    z = np.asarray(payoffs, dtype=float)
    p = np.asarray(probs, dtype=float)
    if z.shape != p.shape or z.ndim != 1:
        raise ValueError("payoffs and probs must be 1-d vectors of equal length")
    if np.any(p < -PAYOFF_MERGE_TOL):
        raise ValueError(f"negative probability in {p}")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, expected 1 within 1e-6")
    p = np.clip(p, 0.0, None)
    return Lottery(z, p / p.sum())


@dataclass(frozen=True)
class Menu:
    """A binary menu; both lotteries must have the same number of payoffs."""

    lottery0: Lottery
    lottery1: Lottery

    def __post_init__(self):
        if self.lottery0.size != self.lottery1.size:
            raise ValueError("both lotteries in a menu must have the same J")

    @property
    def n_payoffs(self) -> int:
        return self.lottery0.size

    def flatten(self) -> np.ndarray:
        """Canonical coordinate order (z0, p0, z1, p1)."""
        return np.concatenate(
            [self.lottery0.payoffs, self.lottery0.probs,
             self.lottery1.payoffs, self.lottery1.probs]
        )

    def swapped(self) -> "Menu":
        return Menu(self.lottery1, self.lottery0)

    def to_json_dict(self) -> dict:
        return {"lottery0": self.lottery0.to_json_dict(),
                "lottery1": self.lottery1.to_json_dict()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Menu":
        return cls(Lottery.from_json_dict(d["lottery0"]),
                   Lottery.from_json_dict(d["lottery1"]))


def _unchecked_lottery(payoffs, probs) -> Lottery:
    lot = object.__new__(Lottery)
    object.__setattr__(lot, "payoffs", _readonly(payoffs))
    object.__setattr__(lot, "probs", _readonly(probs))
    return lot


def menu_from_flat(x: np.ndarray, n_payoffs: int, validate: bool = True) -> Menu:
    """Inverse of :meth:`Menu.flatten`.

    ``validate=False`` skips the simplex invariant; finite-difference probes
    evaluate the smooth formulas a step off the simplex.
    """
    x = np.asarray(x, dtype=float)
    J = n_payoffs
    if x.size != 4 * J:
        raise ValueError(f"flat vector has length {x.size}, expected {4 * J}")
    z0, p0, z1, p1 = x[:J], x[J:2 * J], x[2 * J:3 * J], x[3 * J:]
    if validate:
        return Menu(Lottery(z0, p0), Lottery(z1, p1))
    menu = object.__new__(Menu)
    object.__setattr__(menu, "lottery0", _unchecked_lottery(z0, p0))
    object.__setattr__(menu, "lottery1", _unchecked_lottery(z1, p1))
    return menu


@dataclass(frozen=True)
class Example:
    """A menu plus the modeled choice probability for lottery 1."""

    menu: Menu
    choice_prob: float

    def __post_init__(self):
        if not 0.0 <= self.choice_prob <= 1.0:
            raise ValueError("choice probability outside [0, 1]")

    @property
    def implied_choice(self) -> int:
        # Ties at exactly 0.5 map to lottery 1.
        return 1 if self.choice_prob >= 0.5 else 0


@dataclass(frozen=True)
class ExampleCollection:
    """An ordered, non-empty collection of examples with run provenance."""

    examples: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.examples:
            raise ValueError("collection must be non-empty")

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def menus(self) -> list:
        return [e.menu for e in self.examples]

    @property
    def choice_probs(self) -> np.ndarray:
        return np.array([e.choice_prob for e in self.examples])

    @property
    def implied_choices(self) -> np.ndarray:
        return np.array([e.implied_choice for e in self.examples], dtype=int)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection of a vector onto the unit simplex.

    Sort-based algorithm; O(n log n), exact up to floating point.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    n = v.size
    # Points already on the simplex (up to accumulated rounding) are their own
    # projection; returning them unchanged makes the operation idempotent
    # bit-for-bit.
    if np.all(v >= 0.0) and abs(v.sum() - 1.0) <= 64 * np.finfo(float).eps:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def sample_random_menu(rng: np.random.Generator, n_payoffs: int,
                       payoff_low: float, payoff_high: float) -> Menu:
    """Random menu: i.i.d. uniform payoffs, sum-normalized uniform probabilities."""
    if payoff_low >= payoff_high:
        raise ValueError("payoff_low must be strictly below payoff_high")
    if n_payoffs < 1:
        raise ValueError("need at least one payoff")

    def lottery():
        z = rng.uniform(payoff_low, payoff_high, size=n_payoffs)
        p = rng.uniform(0.0, 1.0, size=n_payoffs)
        return Lottery(z, p / p.sum())

    return Menu(lottery(), lottery())


class FosdOrder(enum.Enum):
    A_DOMINATES = "a_dominates"
    B_DOMINATES = "b_dominates"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def merge_payoff_grid(lotteries, tol: float = PAYOFF_MERGE_TOL) -> np.ndarray:
    """Distinct sorted payoffs across lotteries, merging values within tol."""
    values = np.sort(np.concatenate([l.payoffs for l in lotteries]))
    merged = [values[0]]
    for v in values[1:]:
        if v - merged[-1] > tol:
            merged.append(v)
    return np.array(merged)


def probs_on_grid(lottery: Lottery, grid: np.ndarray,
                  tol: float = PAYOFF_MERGE_TOL) -> np.ndarray:
    """Re-express a lottery's probabilities over a merged payoff grid."""
    out = np.zeros(grid.size)
    idx = np.searchsorted(grid, lottery.payoffs)
    for z, p, i in zip(lottery.payoffs, lottery.probs, idx):
        if i < grid.size and abs(grid[i] - z) <= tol:
            out[i] += p
        elif i > 0 and abs(grid[i - 1] - z) <= tol:
            out[i - 1] += p
        else:
            raise ValueError(f"payoff {z} not on merged grid")
    return out


def fosd_compare(a: Lottery, b: Lottery, tol: float = PAYOFF_MERGE_TOL) -> FosdOrder:
    """First-order stochastic dominance on the merged payoff grid.

    ``a`` dominates iff its CDF is everywhere weakly below ``b``'s and strictly
    below somewhere.
    """
    grid = merge_payoff_grid([a, b], tol)
    cdf_a = np.cumsum(probs_on_grid(a, grid, tol))
    cdf_b = np.cumsum(probs_on_grid(b, grid, tol))
    diff = cdf_a - cdf_b
    a_weak = np.all(diff <= tol)
    b_weak = np.all(diff >= -tol)
    if a_weak and b_weak:
        return FosdOrder.EQUAL
    if a_weak:
        return FosdOrder.A_DOMINATES
    if b_weak:
        return FosdOrder.B_DOMINATES
    return FosdOrder.INCOMPARABLE


@dataclass(frozen=True)
class LotteryStats:
    expected_value: float
    variance: float
    skew: float
    payoff_range: float
    min_payoff: float
    max_payoff: float
    prob_range: float
    min_prob: float
    max_prob: float

    def as_array(self) -> np.ndarray:
        return np.array([self.expected_value, self.variance, self.skew,
                         self.payoff_range, self.min_payoff, self.max_payoff,
                         self.prob_range, self.min_prob, self.max_prob])


STAT_NAMES = ("expected_value", "variance", "skew", "payoff_range",
              "min_payoff", "max_payoff", "prob_range", "min_prob", "max_prob")


def lottery_stats(lottery: Lottery) -> LotteryStats:
    """Moments and range summaries under the lottery's distribution."""
    z, p = lottery.payoffs, lottery.probs
    ev = float(p @ z)
    var = float(p @ (z - ev) ** 2)
    if var < 1e-12:
        skew = 0.0
    else:
        skew = float(p @ (z - ev) ** 3) / var ** 1.5
    return LotteryStats(
        expected_value=ev,
        variance=var,
        skew=skew,
        payoff_range=float(z.max() - z.min()),
        min_payoff=float(z.min()),
        max_payoff=float(z.max()),
        prob_range=float(p.max() - p.min()),
        min_prob=float(p.min()),
        max_prob=float(p.max()),
    )


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Per-run generator derived from (master seed, run index).

    Schedule-independent: the stream depends only on the pair, so parallel
    workers reproduce single-threaded output.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run_index,)))
