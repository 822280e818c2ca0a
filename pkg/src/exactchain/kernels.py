"""Transition kernels with computable conditional minorization bounds.

Every kernel works on the internal alphabet {0, .., m-1}.  Binary families
use 0 for the minus symbol and 1 for the plus symbol; presentation mapping
(0 -> -1, 1 -> +1) is left to callers.

The central primitive is ``lower_prob(a, w)``: a lower bound on the
conditional probability of symbol ``a`` given any infinite past that extends
the finite suffix ``w``.  Suffixes are reversed: ``w[0]`` is the most recent
symbol (lag 1), ``w[j]`` is the symbol at lag ``j + 1``.  The bound must be

  * sharp enough to be useful (exact infima where a closed form exists,
    conservative otherwise),
  * monotone under suffix extension: appending one more pinned symbol never
    decreases ``lower_prob`` for any fixed ``a``.

Monotonicity is what makes the nested interval partition of the update rule
well defined, so it is asserted by the test suite for every family.

Infinite series tails that enter a bound are always rounded up by one notch
(factor ``1 + 1e-12``) so that the resulting lower bound errs downward.
Finite pinned sums are plain float sums and carry no deliberate bias.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from . import skeletons as _sk
from .streams import y_thresholds

__all__ = [
    "KernelError",
    "WeightSeq",
    "GeometricWeights",
    "PowerLawWeights",
    "Kernel",
    "MarkovEmbedded",
    "BinaryAR",
    "ProportionKernel",
    "QFamily",
    "PowerGeometricQ",
    "TableQ",
    "RenewalMixture",
    "ParityAR",
    "OddWindow",
    "MajorityKernel",
    "CeilPowerF",
    "RunLengthKernel",
    "ExpDecay",
    "PowerDecay",
    "SignChangeKernel",
    "ContinuityProfile",
    "continuity_profile",
    "alpha_table",
    "alpha_bar_table",
]

# Tail bounds are inflated by one notch so derived lower bounds round down.
_UP = 1.0 + 1e-12


class KernelError(ValueError):
    """Invalid kernel parameters."""


def _logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _pm(sym: int) -> int:
    """Internal binary symbol to +-1."""
    return 2 * sym - 1


# ---------------------------------------------------------------------------
# coefficient sequences


class WeightSeq(ABC):
    """Summable coefficient sequence theta_1, theta_2, ... with tail bounds."""

    @abstractmethod
    def coef(self, k: int) -> float:
        """theta_k for k >= 1."""

    @abstractmethod
    def abs_tail(self, d: int) -> float:
        """Upper bound on sum_{k > d} |theta_k|, rounded up."""

    def abs_sum(self) -> float:
        return self.abs_tail(0)

    def coefs(self, kmax: int) -> np.ndarray:
        return np.array([self.coef(k) for k in range(1, kmax + 1)])


class GeometricWeights(WeightSeq):
    """theta_k = lam * rho**k."""

    def __init__(self, lam: float, rho: float):
        if not 0.0 < rho < 1.0:
            raise KernelError(f"rho must lie in (0,1), got {rho}")
        self.lam = float(lam)
        self.rho = float(rho)

    def coef(self, k: int) -> float:
        return self.lam * self.rho**k

    def abs_tail(self, d: int) -> float:
        return abs(self.lam) * self.rho ** (d + 1) / (1.0 - self.rho) * _UP

    def __repr__(self):
        return f"GeometricWeights(lam={self.lam}, rho={self.rho})"


class PowerLawWeights(WeightSeq):
    """theta_k = lam * k**(-p) with p > 1."""

    def __init__(self, lam: float, p: float):
        if not p > 1.0:
            raise KernelError(f"power-law exponent must exceed 1, got {p}")
        self.lam = float(lam)
        self.p = float(p)

    def coef(self, k: int) -> float:
        return self.lam * float(k) ** (-self.p)

    def abs_tail(self, d: int) -> float:
        # Hurwitz zeta(p, d+1) = sum_{k > d} k**(-p)
        return abs(self.lam) * float(_hurwitz_zeta(self.p, d + 1)) * _UP

    def __repr__(self):
        return f"PowerLawWeights(lam={self.lam}, p={self.p})"


def _require_decreasing_nonneg(weights: WeightSeq, what: str, depth: int = 64):
    prev = math.inf
    for k in range(1, depth + 1):
        c = weights.coef(k)
        if c < 0.0:
            raise KernelError(f"{what} must be non-negative, coef({k}) = {c}")
        if c > prev:
            raise KernelError(f"{what} must be non-increasing, violated at k={k}")
        prev = c


# ---------------------------------------------------------------------------
# kernel interface


class Kernel(ABC):
    """A transition kernel over {0, .., m-1} with conditional minorization."""

    m: int

    @abstractmethod
    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        """Lower bound on P(a | any past extending the reversed suffix w)."""

    def omega(self, w: Sequence[int]) -> float:
        """Total minorization mass available after seeing w."""
        return math.fsum(self.lower_prob(a, w) for a in range(self.m))

    def lower_pair(self, w: Sequence[int]) -> tuple[float, float]:
        """(lower_prob(0, w), lower_prob(1, w)); binary kernels override
        this to share one suffix scan between the two bounds."""
        return self.lower_prob(0, w), self.lower_prob(1, w)

    def alpha(self) -> np.ndarray:
        """Per-symbol unconditional minorization masses lower_prob(., ())."""
        cached = getattr(self, "_alpha_cache", None)
        if cached is None:
            cached = np.array([self.lower_prob(a, ()) for a in range(self.m)])
            self._alpha_cache = cached
        return cached

    def alpha_minus1(self) -> float:
        """Total unconditional mass; must be positive for the sampler."""
        return math.fsum(self.alpha())

    def thresholds(self) -> np.ndarray:
        cached = getattr(self, "_th_cache", None)
        if cached is None:
            cached = y_thresholds(self.alpha())
            self._th_cache = cached
        return cached

    def _check_symbol(self, a: int):
        if not 0 <= a < self.m:
            raise ValueError(f"symbol {a} outside alphabet of size {self.m}")


# ---------------------------------------------------------------------------
# finite-order chains embedded in the infinite-order interface


class MarkovEmbedded(Kernel):
    """Finite order r chain; order 0 is an i.i.d. source.

    ``table[idx, a]`` is P(a | suffix), where the row index encodes the
    reversed suffix (w[0], .., w[r-1]) in base m with w[0] least significant.
    For suffixes shorter than r the bound is the exact minimum over all
    completions of the missing coordinates.
    """

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim == 1:
            table = table[None, :]
        if table.ndim != 2:
            raise KernelError("table must be 1-d or 2-d")
        rows, m = table.shape
        if m < 2:
            raise KernelError("alphabet must have at least 2 symbols")
        order = 0
        while m**order < rows:
            order += 1
        if m**order != rows:
            raise KernelError(f"table has {rows} rows, not a power of m={m}")
        if np.any(table < 0.0) or np.any(np.abs(table.sum(axis=1) - 1.0) > 1e-9):
            raise KernelError("table rows must be probability vectors")
        self.table = table
        self.m = m
        self.order = order
        self._cache: dict = {}

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        d = min(len(w), self.order)
        key = (a, tuple(w[:d]))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        base = 0
        for j in range(d):
            s = w[j]
            if not 0 <= s < self.m:
                raise ValueError(f"suffix symbol {s} outside alphabet")
            base += s * self.m**j
        step = self.m**d
        # rows sharing the pinned low coordinates, one per completion
        vals = self.table[base::step, a] if d < self.order else self.table[base : base + 1, a]
        out = float(vals.min())
        self._cache[key] = out
        return out


# ---------------------------------------------------------------------------
# autoregressive binary chains


class BinaryAR(Kernel):
    """Logistic autoregressive binary kernel.

    P(1 | past) = logistic(theta0 + sum_k theta_k s_{-k}) with s in {-1, +1}.
    The bounds push the unseen tail fully against the requested symbol, which
    attains the infimum because the logistic is increasing.
    """

    m = 2

    def __init__(self, theta0: float = 0.0, weights: WeightSeq | None = None):
        if weights is None:
            weights = GeometricWeights(0.3, 0.5)
        if not math.isfinite(theta0):
            raise KernelError("theta0 must be finite")
        s = weights.abs_sum()
        if not math.isfinite(s):
            raise KernelError("weights must be absolutely summable")
        self.theta0 = float(theta0)
        self.weights = weights

    def _partial(self, w: Sequence[int]) -> float:
        s = self.theta0
        coef = self.weights.coef
        for j, sym in enumerate(w):
            s += _pm(sym) * coef(j + 1)
        return s

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        t = self.weights.abs_tail(len(w))
        s = self._partial(w)
        if a == 1:
            return _logistic(s - t)
        return 1.0 - _logistic(s + t)

    def lower_pair(self, w):
        t = self.weights.abs_tail(len(w))
        s = self._partial(w)
        return 1.0 - _logistic(s + t), _logistic(s - t)


# ---------------------------------------------------------------------------
# proportion-triggered kernel


class ProportionKernel(Kernel):
    """Binary kernel whose memory regime switches at a proportion threshold.

    With T = first horizon over which the fraction of plus symbols reaches
    sigma, the plus probability is

      P(1 | past) = b1 * (1 - c * sum_i coef(i) * 1{s_{-i} = minus}),

    where coef(i) is beta(i) for lags before T and gamma(i) at or beyond T.
    Whether T falls inside the pinned suffix is decidable from the suffix
    alone, which is what makes the bounds exact.

    The constraint b1 * (1 - c * sum beta) > sigma guarantees both that the
    kernel is well defined and that the plus minorization mass exceeds sigma,
    so proportion-based scans over certain symbols terminate.
    """

    m = 2

    def __init__(
        self,
        sigma: float = 0.3,
        b1: float = 0.7,
        c: float = 0.5,
        beta: WeightSeq | None = None,
        gamma: WeightSeq | None = None,
        check_depth: int = 4096,
    ):
        if beta is None:
            beta = GeometricWeights(0.5, 0.5)
        if gamma is None:
            gamma = GeometricWeights(0.25, 0.5)
        if not 0.0 < sigma < 1.0:
            raise KernelError(f"sigma must lie in (0,1), got {sigma}")
        if not 0.0 < b1 < 1.0:
            raise KernelError(f"b1 must lie in (0,1), got {b1}")
        if c < 0.0:
            raise KernelError(f"c must be non-negative, got {c}")
        _require_decreasing_nonneg(beta, "beta")
        _require_decreasing_nonneg(gamma, "gamma")
        for i in range(1, check_depth + 1):
            if gamma.coef(i) > beta.coef(i) * (1.0 + 1e-12):
                raise KernelError(f"gamma must not exceed beta, violated at i={i}")
        if gamma.abs_tail(check_depth) > beta.abs_tail(check_depth) * (1.0 + 1e-9):
            raise KernelError("gamma tail must not exceed beta tail")
        base = b1 * (1.0 - c * beta.abs_sum())
        if not base > sigma:
            raise KernelError(
                f"b1 * (1 - c * sum beta) = {base} must exceed sigma = {sigma}"
            )
        self.sigma = float(sigma)
        self.b1 = float(b1)
        self.c = float(c)
        self.beta = beta
        self.gamma = gamma

    def _t_sigma(self, w: Sequence[int]) -> int | None:
        """First pinned horizon whose plus fraction reaches sigma, else None.

        If no pinned horizon qualifies, no completion can change that for
        horizons within the suffix, so T certainly exceeds len(w).
        """
        ones = 0
        for k, sym in enumerate(w, start=1):
            if sym == 1:
                ones += 1
            if ones >= self.sigma * k:
                return k
        return None

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        d = len(w)
        t = self._t_sigma(w)
        if t is None:
            # T beyond the suffix: every pinned minus lag carries beta
            pinned = math.fsum(
                self.beta.coef(i) for i, sym in enumerate(w, start=1) if sym == 0
            )
            if a == 1:
                return self.b1 * (1.0 - self.c * (pinned + self.beta.abs_tail(d)))
            return 1.0 - self.b1 * (1.0 - self.c * pinned)
        pinned = math.fsum(
            (self.beta.coef(i) if i < t else self.gamma.coef(i))
            for i, sym in enumerate(w, start=1)
            if sym == 0
        )
        if a == 1:
            return self.b1 * (1.0 - self.c * (pinned + self.gamma.abs_tail(d)))
        return 1.0 - self.b1 * (1.0 - self.c * pinned)

    def lower_pair(self, w):
        d = len(w)
        t = self._t_sigma(w)
        if t is None:
            pinned = math.fsum(
                self.beta.coef(i) for i, sym in enumerate(w, start=1) if sym == 0
            )
            tail = self.beta.abs_tail(d)
        else:
            pinned = math.fsum(
                (self.beta.coef(i) if i < t else self.gamma.coef(i))
                for i, sym in enumerate(w, start=1)
                if sym == 0
            )
            tail = self.gamma.abs_tail(d)
        return (
            1.0 - self.b1 * (1.0 - self.c * pinned),
            self.b1 * (1.0 - self.c * (pinned + tail)),
        )


# ---------------------------------------------------------------------------
# renewal mixture


class QFamily(ABC):
    """Return-time laws q^l indexed by the lag l of the most recent plus."""

    #: True when the law has unbounded support.
    infinite_support = True

    @abstractmethod
    def prob(self, l: int, n: int) -> float:
        """q_n^l for n >= 1."""

    @abstractmethod
    def cum(self, l: int, k: int) -> float:
        """sum_{n <= k} q_n^l."""


class PowerGeometricQ(QFamily):
    """Geometric return law with success probability l**(-a)."""

    def __init__(self, a: float):
        if not a > 0.0:
            raise KernelError(f"decay exponent must be positive, got {a}")
        self.a = float(a)

    def _p(self, l: int) -> float:
        return float(l) ** (-self.a)

    def prob(self, l: int, n: int) -> float:
        p = self._p(l)
        return p * (1.0 - p) ** (n - 1)

    def cum(self, l: int, k: int) -> float:
        return 1.0 - (1.0 - self._p(l)) ** k


class TableQ(QFamily):
    """One finite return law shared by every lag."""

    infinite_support = False

    def __init__(self, probs: Sequence[float]):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) == 0:
            raise KernelError("probs must be a non-empty 1-d sequence")
        if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-12:
            raise KernelError("probs must be a probability vector")
        self.probs = probs
        self._cum = np.cumsum(probs)

    def prob(self, l: int, n: int) -> float:
        return float(self.probs[n - 1]) if n <= len(self.probs) else 0.0

    def cum(self, l: int, k: int) -> float:
        if k <= 0:
            return 0.0
        return float(self._cum[min(k, len(self.probs)) - 1])


class RenewalMixture(Kernel):
    """Noisy copy of the symbol one return-time ago.

    Given the most recent plus at lag L, the chain repeats the symbol at lag
    L + N with probability 1 - 2*eps, where N has law q^L, and otherwise
    draws uniformly.  Lags beyond the pinned suffix contribute nothing to the
    infimum (the adversary sets them to the other symbol), so the bounds are
    exact.
    """

    m = 2

    def __init__(self, eps: float = 0.25, q: QFamily | None = None):
        if q is None:
            q = PowerGeometricQ(0.4)
        if not 0.0 < eps < 0.5:
            raise KernelError(f"eps must lie in (0, 1/2), got {eps}")
        self.eps = float(eps)
        self.q = q

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is None:
            return self.eps
        d = len(w)
        acc = 0.0
        for n in range(1, d - l + 1):
            if w[l + n - 1] == a:
                acc += self.q.prob(l, n)
        return self.eps + (1.0 - 2.0 * self.eps) * acc

    def lower_pair(self, w):
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is None:
            return self.eps, self.eps
        d = len(w)
        acc0 = 0.0
        acc1 = 0.0
        prob = self.q.prob
        for n in range(1, d - l + 1):
            sym = w[l + n - 1]
            if sym == 0:
                acc0 += prob(l, n)
            elif sym == 1:
                acc1 += prob(l, n)
        gain = 1.0 - 2.0 * self.eps
        return self.eps + gain * acc0, self.eps + gain * acc1


# ---------------------------------------------------------------------------
# parity-switched autoregression


class ParityAR(Kernel):
    """Two logistic AR kernels selected by the parity of the last plus lag.

    The lag L of the most recent plus symbol picks the model: odd L uses the
    first parameter set, even L the second.  On the all-minus past, where L
    is undefined, the plus probability is pinned to the smaller of the two
    all-minus limits so it never disturbs any infimum.

    Weights must be non-negative and non-increasing; the all-minus bounds
    lean on both properties.
    """

    m = 2

    def __init__(
        self,
        odd: tuple[float, WeightSeq] = (0.3, GeometricWeights(0.5, 0.4)),
        even: tuple[float, WeightSeq] = (-0.2, GeometricWeights(0.3, 0.5)),
    ):
        for name, (th0, wts) in (("odd", odd), ("even", even)):
            if not math.isfinite(th0):
                raise KernelError(f"{name} theta0 must be finite")
            _require_decreasing_nonneg(wts, f"{name} weights")
        self._models = {1: odd, 0: even}
        # defined value of P(1 | all-minus past): the smaller all-minus limit
        self._p1_floor = min(
            _logistic(th0 - wts.abs_sum()) for th0, wts in (odd, even)
        )

    def _pinned(self, th0: float, wts: WeightSeq, w: Sequence[int]) -> float:
        s = th0
        coef = wts.coef
        for j, sym in enumerate(w):
            s += _pm(sym) * coef(j + 1)
        return s

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        d = len(w)
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is not None:
            th0, wts = self._models[l % 2]
            s = self._pinned(th0, wts, w)
            t = wts.abs_tail(d)
            return _logistic(s - t) if a == 1 else 1.0 - _logistic(s + t)
        if a == 1:
            # infimum over completions is the all-minus atom by construction
            return self._p1_floor
        # supremum of P(1): place the first plus at depth d+1 or d+2 (the
        # weights are non-increasing, so deeper placements are dominated)
        # and push the unseen tail upward.
        sup = self._p1_floor
        for j in (1, 2):
            th0, wts = self._models[(d + j) % 2]
            arg = th0
            for i in range(1, d + j):
                arg -= wts.coef(i)
            arg += wts.coef(d + j) + wts.abs_tail(d + j)
            sup = max(sup, _logistic(arg))
        return 1.0 - sup

    def lower_pair(self, w):
        d = len(w)
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is not None:
            th0, wts = self._models[l % 2]
            s = self._pinned(th0, wts, w)
            t = wts.abs_tail(d)
            return 1.0 - _logistic(s + t), _logistic(s - t)
        sup = self._p1_floor
        for j in (1, 2):
            th0, wts = self._models[(d + j) % 2]
            arg = th0
            for i in range(1, d + j):
                arg -= wts.coef(i)
            arg += wts.coef(d + j) + wts.abs_tail(d + j)
            sup = max(sup, _logistic(arg))
        return 1.0 - sup, self._p1_floor


# ---------------------------------------------------------------------------
# majority-vote kernel


class OddWindow:
    """Odd, non-decreasing, unbounded window sizes.

    size(l) = 2 * slope * ceil(l / stretch) + 1.  A larger stretch grows the
    windows more slowly, which keeps coalescence charges small; slope scales
    them outright.
    """

    def __init__(self, slope: int = 1, stretch: int = 1):
        if not (isinstance(slope, int) and slope >= 1):
            raise KernelError(f"slope must be a positive int, got {slope}")
        if not (isinstance(stretch, int) and stretch >= 1):
            raise KernelError(f"stretch must be a positive int, got {stretch}")
        self.slope = slope
        self.stretch = stretch

    def size(self, l: int) -> int:
        return 2 * self.slope * ((l + self.stretch - 1) // self.stretch) + 1

    def first_exceeding(self, k: int) -> int:
        """Smallest l >= 1 with size(l) > k."""
        q = (k - 1) // (2 * self.slope) + 1  # needed ceil(l / stretch)
        return max(1, (q - 1) * self.stretch + 1)


class MajorityKernel(Kernel):
    """Majority vote over a window behind the most recent plus symbol.

    With the most recent plus at lag L and h = window.size(L), the plus
    probability is 1 - eps_L when the majority of the h symbols at lags
    L+1 .. L+h is plus, and eps_L otherwise.  On the all-minus past it is
    pinned to the global floor eps.  Windows are odd so the vote never ties.
    """

    m = 2

    def __init__(
        self,
        eps: float = 0.24,
        levels: Sequence[float] = (0.25, 0.255),
        window: OddWindow | None = None,
    ):
        if not 0.0 < eps < 0.25:
            raise KernelError(f"eps must lie in (0, 1/4), got {eps}")
        levels = tuple(float(x) for x in levels)
        if not levels:
            raise KernelError("levels must be non-empty")
        for x in levels:
            if not eps < x < 0.5 - eps:
                raise KernelError(
                    f"levels must lie in (eps, 1/2 - eps) = ({eps}, {0.5 - eps}), got {x}"
                )
        self.eps = float(eps)
        self.levels = levels
        self._min_level = min(levels)
        self.window = window if window is not None else OddWindow(1, 16)

    def level(self, l: int) -> float:
        return self.levels[(l - 1) % len(self.levels)]

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        d = len(w)
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is None:
            # completions reach eps_l and 1 - eps_l for every deeper l, plus
            # the all-minus atom at eps
            return self.eps if a == 1 else self._min_level
        h = self.window.size(l)
        el = self.level(l)
        diff = 0
        for j in range(l, min(d, l + h)):
            diff += _pm(w[j])
        free = l + h - d if l + h > d else 0
        if abs(diff) > free:
            p1 = 1.0 - el if diff > 0 else el
            return p1 if a == 1 else 1.0 - p1
        # vote still open: the adversary swings it either way
        return el

    def lower_pair(self, w):
        d = len(w)
        l = None
        for j, sym in enumerate(w):
            if sym == 1:
                l = j + 1
                break
        if l is None:
            return self._min_level, self.eps
        h = self.window.size(l)
        el = self.level(l)
        diff = 0
        for j in range(l, min(d, l + h)):
            diff += _pm(w[j])
        free = l + h - d if l + h > d else 0
        if abs(diff) > free:
            p1 = 1.0 - el if diff > 0 else el
            return 1.0 - p1, p1
        return el, el


# ---------------------------------------------------------------------------
# run-length kernel


class CeilPowerF:
    """Integer-valued f(k) = ceil(k**p) + base, increasing and unbounded."""

    def __init__(self, p: float = 2.0, base: int = 0):
        if not p > 0.0:
            raise KernelError(f"exponent must be positive, got {p}")
        if not (isinstance(base, int) and base >= 0):
            raise KernelError(f"base must be a non-negative int, got {base}")
        self.p = float(p)
        self.base = base

    def __call__(self, k: int) -> int:
        return math.ceil(float(k) ** self.p) + self.base


class RunLengthKernel(Kernel):
    """Plus probability set by the depth at which the past becomes constant.

    K(past) is the smallest i such that all symbols at lags >= i agree
    (1 for a constant past, infinity when changes never stop), and
    P(1 | past) = eps + 1/f(K).  K itself is never decidable from a finite
    suffix, but pinned sign changes do bound it from below, which is all the
    bounds need:

      lower_prob(1, w) = eps                      (infinitely many changes)
      lower_prob(0, w) = 1 - eps - 1/f(kappa(w))  (constant beyond w)

    with kappa(w) = deepest pinned change + 1.  f must be integer valued,
    increasing and unbounded with f(1) >= 1/(1 - 2*eps), which keeps the
    minus bound at least eps.
    """

    m = 2

    def __init__(self, eps: float = 0.2, f=None):
        if not 0.0 < eps < 0.5:
            raise KernelError(f"eps must lie in (0, 1/2), got {eps}")
        if f is None:
            f = CeilPowerF(3.0, math.ceil(1.0 / (1.0 - 2.0 * eps)))
        f1 = f(1)
        if f1 != int(f1):
            raise KernelError("f must be integer valued")
        if f1 * (1.0 - 2.0 * eps) < 1.0:
            raise KernelError(
                f"f(1) = {f1} must be at least 1/(1-2*eps) = {1.0 / (1.0 - 2.0 * eps)}"
            )
        prev = f1
        for k in range(2, 64):
            cur = f(k)
            if cur != int(cur) or cur < prev:
                raise KernelError("f must be integer valued and non-decreasing")
            prev = cur
        self.eps = float(eps)
        self.f = f

    @staticmethod
    def kappa(w: Sequence[int]) -> int:
        """Deepest pinned sign change + 1; 1 when w is constant or short."""
        last = 0
        for i in range(len(w) - 1):
            if w[i] != w[i + 1]:
                last = i + 1
        return last + 1

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        if a == 1:
            return self.eps
        return 1.0 - self.eps - 1.0 / self.f(self.kappa(w))

    def lower_pair(self, w):
        return 1.0 - self.eps - 1.0 / self.f(self.kappa(w)), self.eps


# ---------------------------------------------------------------------------
# sign-change damped autoregression


class ExpDecay:
    """f(x) = exp(-beta * x); f(0) = 1."""

    def __init__(self, beta: float = 1.0):
        if not beta > 0.0:
            raise KernelError(f"beta must be positive, got {beta}")
        self.beta = float(beta)

    def __call__(self, x: float) -> float:
        return math.exp(-self.beta * x)


class PowerDecay:
    """f(x) = (1 + x)**(-p); f(0) = 1."""

    def __init__(self, p: float = 1.0):
        if not p > 0.0:
            raise KernelError(f"p must be positive, got {p}")
        self.p = float(p)

    def __call__(self, x: float) -> float:
        return (1.0 + x) ** (-self.p)


class SignChangeKernel(Kernel):
    """Linear AR kernel damped by the number of pinned sign changes.

    P(1 | past) = 1/2 + sum_k theta_k s_{-k} f(S_k), where S_k counts sign
    changes among the k most recent symbols and f decreases from f(0) = 1
    to 0.  The unseen tail is bounded through f(S_d(w)), which dominates
    every deeper damping factor; the resulting bound is a valid infimum
    under-estimate and is monotone under suffix extension because the same
    factor multiplies the freed tail mass.

    Requires sum |theta_k| < 1/2 so probabilities stay inside (0, 1).
    """

    m = 2

    def __init__(self, weights: WeightSeq | None = None, f=None):
        if weights is None:
            weights = GeometricWeights(0.15, 0.5)
        s = weights.abs_sum()
        if not s < 0.5:
            raise KernelError(f"sum |theta_k| must be below 1/2, got {s}")
        if f is None:
            f = ExpDecay(1.0)
        f0 = f(0.0)
        if abs(f0 - 1.0) > 1e-12:
            raise KernelError(f"f(0) must equal 1, got {f0}")
        self.weights = weights
        self.f = f

    def _pinned_and_changes(self, w: Sequence[int]) -> tuple[float, int]:
        acc = 0.0
        changes = 0
        coef = self.weights.coef
        f = self.f
        for j, sym in enumerate(w):
            if j > 0 and sym != w[j - 1]:
                changes += 1
            acc += _pm(sym) * coef(j + 1) * f(float(changes))
        return acc, changes

    def lower_prob(self, a: int, w: Sequence[int]) -> float:
        self._check_symbol(a)
        pinned, changes = self._pinned_and_changes(w)
        slack = self.f(float(changes)) * self.weights.abs_tail(len(w))
        if a == 1:
            return 0.5 + pinned - slack
        return 0.5 - pinned - slack

    def lower_pair(self, w):
        pinned, changes = self._pinned_and_changes(w)
        slack = self.f(float(changes)) * self.weights.abs_tail(len(w))
        return 0.5 - pinned - slack, 0.5 + pinned - slack


# ---------------------------------------------------------------------------
# continuity profiles

# Coverage tables drive the block race: entry k of a row is a lower bound on
# the minorization mass available once k extra symbols below a context of
# length <= i are pinned.  Rows must be non-decreasing in k.  The local rows
# bound coverage below a single context; the ext rows bound coverage below a
# stack of concatenated contexts and exist for kernels whose contexts pin a
# structural feature (a sign change) rather than values alone.


class ProfileUnsupported(KernelError):
    """The kernel/skeleton pair has no table of the requested kind."""


class ContinuityProfile(ABC):
    """Coverage tables for one kernel/skeleton pair."""

    supports_local = True
    supports_ext = False

    def __init__(self, kernel: Kernel, skeleton: _sk.Skeleton):
        self.kernel = kernel
        self.skeleton = skeleton

    def alpha_ki(self, k: int, i: int) -> float:
        raise ProfileUnsupported(
            f"{type(self).__name__} has no single-context coverage table"
        )

    def alpha_bar_k(self, k: int, i: int) -> float:
        raise ProfileUnsupported(
            f"{type(self).__name__} has no concatenated-context coverage table"
        )

    def row(self, i: int, kmax: int) -> np.ndarray:
        if not self.supports_local:
            return self.ext_row(i, kmax)
        return np.array([self.alpha_ki(k, i) for k in range(kmax + 1)])

    def ext_row(self, i: int, kmax: int) -> np.ndarray:
        if not self.supports_ext:
            raise ProfileUnsupported(
                f"{type(self).__name__} has no concatenated-context coverage table"
            )
        return np.array([self.alpha_bar_k(k, i) for k in range(kmax + 1)])

    def uniform_alpha(self, k: int) -> float | None:
        """inf over all context lengths, when that infimum is informative."""
        return None

    def slc_h(self):
        """h with full coverage at k >= h(context length), when one exists."""
        return None

    def finite_depth(self) -> int | None:
        """Depth beyond which every context is structurally covered."""
        return None


class _MarkovEmptyProfile(ContinuityProfile):
    def __init__(self, kernel, skeleton):
        super().__init__(kernel, skeleton)
        self._omega: dict[int, float] = {}

    def _omega_k(self, k: int) -> float:
        r = self.kernel.order
        k = min(k, r)
        hit = self._omega.get(k)
        if hit is None:
            m = self.kernel.m
            worst = 1.0
            for code in range(m**k):
                w = [(code // m**j) % m for j in range(k)]
                worst = min(worst, self.kernel.omega(w))
            self._omega[k] = hit = worst
        return hit

    def alpha_ki(self, k, i):
        if i != 0:
            raise ValueError("empty skeleton has only the zero-length context")
        return self._omega_k(k)

    def uniform_alpha(self, k):
        return self._omega_k(k)

    def slc_h(self):
        r = self.kernel.order
        # every context needs depth r; below that nothing is certain yet
        return (lambda l: r), (lambda k: math.inf if k >= r else 0)

    def finite_depth(self):
        return self.kernel.order


class _BinaryAREmptyProfile(ContinuityProfile):
    def alpha_ki(self, k, i):
        if i != 0:
            raise ValueError("empty skeleton has only the zero-length context")
        w = self.kernel.weights
        partial = math.fsum(abs(w.coef(j)) for j in range(1, k + 1))
        lo = self.kernel.theta0 - partial
        hi = self.kernel.theta0 + partial
        s = min(max(0.0, lo), hi)
        t = w.abs_tail(k)
        return 1.0 - (_logistic(s + t) - _logistic(s - t))

    def uniform_alpha(self, k):
        return self.alpha_ki(k, 0)


class _ProportionProfile(ContinuityProfile):
    def alpha_ki(self, k, i):
        if i < 1:
            raise ValueError("proportion contexts have length at least 1")
        kern = self.kernel
        return 1.0 - kern.b1 * kern.c * kern.gamma.abs_tail(k + i - 1)

    def uniform_alpha(self, k):
        return self.alpha_ki(k, 1)


class _RenewalLastOneProfile(ContinuityProfile):
    def alpha_ki(self, k, i):
        if i < 1:
            raise ValueError("last-plus contexts have length at least 1")
        q = self.kernel.q
        if isinstance(q, PowerGeometricQ):
            worst = q.cum(i, k)  # success probability falls with the lag
        elif isinstance(q, TableQ):
            worst = q.cum(1, k)  # lag-invariant
        else:
            worst = min(q.cum(l, k) for l in range(1, i + 1))
        eps = self.kernel.eps
        return 2.0 * eps + (1.0 - 2.0 * eps) * worst

    def finite_depth(self):
        q = self.kernel.q
        # a finite return law pins any renewal within its support
        if isinstance(q, TableQ):
            return len(q.probs)
        return None


class _ParityARLastOneProfile(ContinuityProfile):
    def __init__(self, kernel, skeleton):
        super().__init__(kernel, skeleton)
        self._slope = {}
        for par, (th0, wts) in kernel._models.items():
            s = wts.abs_sum()
            x = min(max(0.0, th0 - s), th0 + s)
            p = _logistic(x)
            self._slope[par] = p * (1.0 - p)

    def alpha_ki(self, k, i):
        if i < 1:
            raise ValueError("last-plus contexts have length at least 1")
        vals = []
        for par, lmin in ((1, 1), (0, 2)):
            if i < lmin:
                continue
            _, wts = self.kernel._models[par]
            vals.append(1.0 - 2.0 * self._slope[par] * wts.abs_tail(k + lmin))
        return max(0.0, min(vals))


class _MajorityLastOneProfile(ContinuityProfile):
    def alpha_ki(self, k, i):
        if i < 1:
            raise ValueError("last-plus contexts have length at least 1")
        kern = self.kernel
        l0 = kern.window.first_exceeding(k)
        if l0 > i:
            return 1.0
        stop = min(i, l0 + len(kern.levels) - 1)
        return 2.0 * min(kern.level(l) for l in range(l0, stop + 1))

    def slc_h(self):
        w = self.kernel.window
        return w.size, w.first_exceeding


class _RunLengthExtProfile(ContinuityProfile):
    supports_local = False
    supports_ext = True

    def alpha_bar_k(self, k, i):
        return 1.0 - 1.0 / self.kernel.f(2 * k + 2)


class _SignChangeExtProfile(ContinuityProfile):
    supports_local = False
    supports_ext = True

    def alpha_bar_k(self, k, i):
        kern = self.kernel
        return 1.0 - 2.0 * kern.f(float(k)) * kern.weights.abs_tail(2 * k + 2)


_PROFILES = {
    (MarkovEmbedded, _sk.EmptySkeleton): _MarkovEmptyProfile,
    (BinaryAR, _sk.EmptySkeleton): _BinaryAREmptyProfile,
    (ProportionKernel, _sk.ProportionSkeleton): _ProportionProfile,
    (RenewalMixture, _sk.LastOneSkeleton): _RenewalLastOneProfile,
    (ParityAR, _sk.LastOneSkeleton): _ParityARLastOneProfile,
    (MajorityKernel, _sk.LastOneSkeleton): _MajorityLastOneProfile,
    (RunLengthKernel, _sk.RunBoundarySkeleton): _RunLengthExtProfile,
    (SignChangeKernel, _sk.RunBoundarySkeleton): _SignChangeExtProfile,
}


def continuity_profile(kernel: Kernel, skeleton: _sk.Skeleton) -> ContinuityProfile:
    cls = _PROFILES.get((type(kernel), type(skeleton)))
    if cls is None:
        raise ProfileUnsupported(
            f"no coverage tables for {type(kernel).__name__} with "
            f"{type(skeleton).__name__}"
        )
    return cls(kernel, skeleton)


def alpha_table(kernel: Kernel, skeleton: _sk.Skeleton, i: int, kmax: int) -> np.ndarray:
    """Single-context coverage row [alpha_0^i, .., alpha_kmax^i]."""
    return continuity_profile(kernel, skeleton).row(i, kmax)


def alpha_bar_table(kernel: Kernel, skeleton: _sk.Skeleton, kmax: int, i: int | None = None) -> np.ndarray:
    """Concatenated-context coverage row [abar_0, .., abar_kmax]."""
    prof = continuity_profile(kernel, skeleton)
    return prof.ext_row(0 if i is None else i, kmax)
