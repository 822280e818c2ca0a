"""Partial context structures over the certain-symbol view of a stream.

A skeleton assigns to each past a context: the shortest suffix that the
kernel pairing treats as the informative part of the history.  Here contexts
are only ever computed through the certain-symbol (Y) view, where some
positions are stars, so both questions the sampler asks are worst case over
star completions:

  * ``max_context_len(y_rev)``: largest context length any completion of the
    reversed, partially certain window can produce, or UNBOUNDED when the
    window does not pin the context at all.
  * ``context_len(w)``: context length of a fully certain reversed suffix,
    or None when the suffix is too short to decide.

Reversed means w[0] / y_rev[0] is the most recent symbol.

Detectors locate good coalescence anchors: indices theta_bar[m] <= m such
that, for every j in [theta_bar[m], m], the symbol at j is certain or its
context is contained in [theta_bar[m], j].  All built-in detectors certify
this inclusive containment, which is what the concatenated-context sampler
mode additionally relies on.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np

from .streams import STAR

__all__ = [
    "UNBOUNDED",
    "Skeleton",
    "EmptySkeleton",
    "LastOneSkeleton",
    "ProportionSkeleton",
    "RunBoundarySkeleton",
    "GoodCoalescenceDetector",
    "TrivialDetector",
    "CertainPatternDetector",
    "ProportionDetector",
    "good_coalescence_time",
    "theta_bar_tail",
]

#: Context length exceeding any finite window.
UNBOUNDED = math.inf


class Skeleton(ABC):
    """Context-length structure used by the coalescence machinery."""

    #: Shortest realized context length.
    min_context_len: int

    @abstractmethod
    def context_len(self, w: Sequence[int]) -> int | None:
        """Context length of the certain reversed suffix w; None if undecided."""

    @abstractmethod
    def max_context_len(self, y_rev: Sequence[int]) -> int | float:
        """Worst-case context length over star completions of y_rev."""

    def block_context_lens(self, y_blk: np.ndarray, offs: np.ndarray) -> np.ndarray:
        """max_context_len at several offsets of one block, as float64.

        y_blk is the certain-symbol view of the block in time order with the
        block start at index 0; entry j is the worst-case context length of
        the past seen from offset offs[j] using block symbols only, with inf
        marking a context the block does not contain.  Subclasses override
        this with batched scans; the fallback just loops.
        """
        out = np.empty(len(offs), dtype=np.float64)
        for j, o in enumerate(offs):
            out[j] = self.max_context_len(y_blk[:o][::-1])
        return out

    def c_pmf(self, masses: Sequence[float], jmax: int) -> np.ndarray | None:
        """Law of the worst-case context length at a fixed time.

        masses are the per-symbol certain masses; the star mass is the
        complement.  Entry j is P(length = j).  None when no closed form
        exists and the caller must estimate by simulation.
        """
        return None


class EmptySkeleton(Skeleton):
    """Memoryless contexts: every past has the empty context."""

    min_context_len = 0

    def context_len(self, w):
        return 0

    def max_context_len(self, y_rev):
        return 0

    def block_context_lens(self, y_blk, offs):
        return np.zeros(len(offs), dtype=np.float64)

    def c_pmf(self, masses, jmax):
        out = np.zeros(jmax + 1)
        out[0] = 1.0
        return out


class LastOneSkeleton(Skeleton):
    """Context reaches back to the most recent plus symbol."""

    min_context_len = 1

    def context_len(self, w):
        for j, sym in enumerate(w):
            if sym == 1:
                return j + 1
        return None

    def max_context_len(self, y_rev):
        # stars may hide a plus, which can only shorten the context
        for j, sym in enumerate(y_rev):
            if sym == 1:
                return j + 1
        return UNBOUNDED

    def block_context_lens(self, y_blk, offs):
        offs = np.asarray(offs, dtype=np.int64)
        if not y_blk.size:
            return np.full(len(offs), np.inf)
        idx = np.arange(y_blk.shape[0], dtype=np.int64)
        last_plus = np.maximum.accumulate(np.where(y_blk == 1, idx, -1))
        prev = np.where(offs > 0, last_plus[offs - 1], -1)
        return np.where(prev >= 0, (offs - prev).astype(np.float64), np.inf)

    def c_pmf(self, masses, jmax):
        p1 = float(masses[1])
        j = np.arange(jmax + 1, dtype=np.float64)
        out = (1.0 - p1) ** (j - 1) * p1
        out[0] = 0.0
        return out


class ProportionSkeleton(Skeleton):
    """Context reaches back until the plus fraction first hits sigma.

    Only certain plus symbols count in the worst case: a star is read as
    minus, which delays the threshold maximally.
    """

    def __init__(self, sigma: float):
        if not 0.0 < sigma < 1.0:
            raise ValueError(f"sigma must lie in (0,1), got {sigma}")
        self.sigma = float(sigma)

    min_context_len = 1

    def _first_hit(self, seq) -> int | None:
        # stars fail the == 1 test, so the same scan serves both views
        ones = 0
        for k, sym in enumerate(seq, start=1):
            if sym == 1:
                ones += 1
            if ones >= self.sigma * k:
                return k
        return None

    def context_len(self, w):
        return self._first_hit(w)

    def max_context_len(self, y_rev):
        hit = self._first_hit(y_rev)
        return UNBOUNDED if hit is None else hit


class RunBoundarySkeleton(Skeleton):
    """Context is the current run plus the first symbol that breaks it.

    A star never certifies a change, and the worst completion extends the
    run through every star until a certain symbol disagrees with the first
    certain symbol.
    """

    min_context_len = 2

    def context_len(self, w):
        for j in range(1, len(w)):
            if w[j] != w[j - 1]:
                return j + 1
        return None

    def max_context_len(self, y_rev):
        first = None
        for j, sym in enumerate(y_rev):
            if sym == STAR:
                continue
            if first is None:
                first = sym
            elif sym != first:
                return j + 1
        return UNBOUNDED

    def block_context_lens(self, y_blk, offs):
        if y_blk.size and int(y_blk.max()) > 1:
            # batched scan below assumes certain symbols are 0/1 only
            return super().block_context_lens(y_blk, offs)
        offs = np.asarray(offs, dtype=np.int64)
        if not y_blk.size:
            return np.full(len(offs), np.inf)
        idx = np.arange(y_blk.shape[0], dtype=np.int64)
        last0 = np.maximum.accumulate(np.where(y_blk == 0, idx, -1))
        last1 = np.maximum.accumulate(np.where(y_blk == 1, idx, -1))
        # the run-breaking symbol is the nearest certain one differing from
        # the most recent certain value, i.e. the older of the two trackers
        older = np.minimum(
            np.where(offs > 0, last0[offs - 1], -1),
            np.where(offs > 0, last1[offs - 1], -1),
        )
        return np.where(older >= 0, (offs - older).astype(np.float64), np.inf)

    def c_pmf(self, masses, jmax):
        p0 = float(masses[0])
        p1 = float(masses[1])
        ps = 1.0 - p0 - p1
        out = np.zeros(jmax + 1)
        for j in range(2, jmax + 1):
            out[j] = p1 * ((p0 + ps) ** (j - 1) - ps ** (j - 1)) + p0 * (
                (p1 + ps) ** (j - 1) - ps ** (j - 1)
            )
        return out


# ---------------------------------------------------------------------------
# good coalescence detectors


class GoodCoalescenceDetector(ABC):
    """Backward scan for anchors whose future contexts stay contained."""

    @abstractmethod
    def find(self, y: Callable[[int], int], m: int) -> int:
        """theta_bar[m]: the most recent good anchor at or before m.

        y(i) returns the certain-symbol view at index i (STAR included) and
        may be called for arbitrarily old indices; the caller bounds the
        total lookback.
        """

    def find_in(self, win, m: int) -> int:
        """find() over a window object exposing y_at and y_block.

        Subclasses override this with chunked array scans; the fallback
        reuses the per-index accessor.
        """
        return self.find(win.y_at, m)

    def tail(self, n: int, masses: Sequence[float]) -> tuple[float, bool] | None:
        """(bound on P(m - theta_bar[m] >= n), is_exact), or None."""
        return None

    def mean_abs(self, masses: Sequence[float]) -> tuple[float, bool] | None:
        """(bound on E[m - theta_bar[m]], is_exact), or None."""
        return None


class TrivialDetector(GoodCoalescenceDetector):
    """Every index is good; pairs with the empty skeleton."""

    def find(self, y, m):
        return m

    def tail(self, n, masses):
        return (0.0 if n >= 1 else 1.0, True)

    def mean_abs(self, masses):
        return (0.0, True)


class CertainPatternDetector(GoodCoalescenceDetector):
    """Anchor at the most recent fully certain occurrence of a pattern.

    Patterns are given in time order (oldest symbol first).  The anchor is
    the oldest index of the matched occurrence: any later context either
    ends inside the occurrence or is cut short by it.
    """

    def __init__(self, patterns: Sequence[Sequence[int]]):
        pats = tuple(tuple(int(s) for s in p) for p in patterns)
        if not pats or any(len(p) == 0 for p in pats):
            raise ValueError("patterns must be non-empty strings")
        lengths = {len(p) for p in pats}
        if len(lengths) != 1:
            raise ValueError("patterns must share one length")
        self.patterns = pats
        self.length = lengths.pop()

    def find(self, y, m):
        i = m
        while True:
            window = tuple(y(i - self.length + 1 + j) for j in range(self.length))
            if window in self.patterns:
                return i - self.length + 1
            i -= 1

    def find_in(self, win, m):
        L = self.length
        size = 128
        top = m + 1
        while True:
            lo = top - size
            # carry L-1 symbols of overlap so straddling occurrences match
            arr = win.y_block(lo, min(top + L - 1, m + 1))
            nstart = arr.shape[0] - L + 1
            if nstart > 0:
                ok = np.zeros(nstart, dtype=bool)
                for p in self.patterns:
                    pm = arr[:nstart] == p[0]
                    for j in range(1, L):
                        pm &= arr[j : nstart + j] == p[j]
                    ok |= pm
                hits = np.nonzero(ok)[0]
                if hits.size:
                    return lo + int(hits[-1])
            top = lo
            size *= 2

    def _hit_prob(self, masses) -> float:
        # patterns over certain symbols are disjoint events per position
        return math.fsum(
            math.prod(float(masses[s]) for s in p) for p in self.patterns
        )

    def tail(self, n, masses):
        if n < 1:
            return (1.0, True)
        q = self._hit_prob(masses)
        if self.length == 1:
            return ((1.0 - q) ** n, True)
        # disjoint blocks of `length` positions each miss independently
        return ((1.0 - q) ** (n // self.length), False)

    def mean_abs(self, masses):
        q = self._hit_prob(masses)
        if self.length == 1:
            return ((1.0 - q) / q, True)
        # sum of the block tail bound above
        return (self.length * (1.0 - q) / q + self.length - 1.0, False)


class ProportionDetector(GoodCoalescenceDetector):
    """Anchor where the certain plus fraction first reaches sigma.

    Minimality of the stopping time makes every intermediate window keep a
    fraction above sigma, which is what containment of later contexts needs;
    it also forces the anchor symbol itself to be a certain plus.
    """

    def __init__(self, sigma: float):
        if not 0.0 < sigma < 1.0:
            raise ValueError(f"sigma must lie in (0,1), got {sigma}")
        self.sigma = float(sigma)

    def find(self, y, m):
        ones = 0
        t = 0
        while True:
            if y(m - t) == 1:
                ones += 1
            if ones >= self.sigma * (t + 1):
                return m - t
            t += 1

    def find_in(self, win, m):
        size = 128
        top = m + 1
        carried = 0
        while True:
            lo = top - size
            arr = win.y_block(lo, top)
            ones = np.cumsum((arr == 1)[::-1])
            lens = np.arange(m - top + 2, m - lo + 2)
            cond = carried + ones >= self.sigma * lens
            w = np.nonzero(cond)[0]
            if w.size:
                return top - 1 - int(w[0])
            carried += int(ones[-1])
            top = lo
            size *= 2

    def tail(self, n, masses):
        if n < 1:
            return (1.0, True)
        p1 = float(masses[1])
        if p1 <= self.sigma:
            return (1.0, False)
        s = self.sigma
        kl = s * math.log(s / p1) + (1.0 - s) * math.log((1.0 - s) / (1.0 - p1))
        return (math.exp(-n * kl), False)


def good_coalescence_time(
    detector: GoodCoalescenceDetector, y, m: int
) -> int:
    """theta_bar[m] for a certain-symbol accessor or window object."""
    if hasattr(y, "y_block"):
        out = detector.find_in(y, m)
    else:
        out = detector.find(y, m)
    if out > m:
        raise RuntimeError(f"detector returned {out} > {m}")
    return out


def theta_bar_tail(
    detector: GoodCoalescenceDetector, n: int, masses: Sequence[float]
) -> tuple[float, bool] | None:
    """Tail bound P(m - theta_bar[m] >= n) with an exactness flag."""
    return detector.tail(n, masses)
