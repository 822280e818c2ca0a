"""Context length scans and coalescence detectors against their definitions.

max_context_len claims a worst case over star completions; here the claim is
certified by literally enumerating every completion.  Detector anchors are
replayed against the slow reference scan, and the closed-form context laws
and tail bounds are checked against direct simulation.
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracles as O
from exactchain import (
    STAR,
    UNBOUNDED,
    CertainPatternDetector,
    EmptySkeleton,
    LastOneSkeleton,
    ProportionDetector,
    ProportionSkeleton,
    RunBoundarySkeleton,
    TrivialDetector,
    good_coalescence_time,
    theta_bar_tail,
)

ywindows = st.lists(st.sampled_from([STAR, 0, 1]), max_size=18).filter(
    lambda w: w.count(STAR) <= 10
)


def skeleton_rules():
    return [
        (LastOneSkeleton(), O.len_lastone),
        (ProportionSkeleton(0.5), O.len_proportion(0.5)),
        (RunBoundarySkeleton(), O.len_runboundary),
    ]


# ---------------------------------------------------------------------------
# context lengths


def test_context_len_examples():
    lo = LastOneSkeleton()
    assert lo.min_context_len == 1
    assert lo.context_len((1,)) == 1
    assert lo.context_len((0, 0, 1)) == 3
    assert lo.context_len((0, 0)) is None
    assert lo.max_context_len((STAR, 1)) == 2
    assert lo.max_context_len((0, STAR, 0)) == UNBOUNDED

    pr = ProportionSkeleton(0.5)
    assert pr.context_len((1,)) == 1
    assert pr.context_len((0, 1, 1)) == 2
    assert pr.context_len((0, 0, 1, 1)) == 4
    assert pr.context_len((0, 0, 1)) is None
    assert pr.max_context_len((STAR, 1, 1)) == 2
    with pytest.raises(ValueError):
        ProportionSkeleton(0.0)

    rb = RunBoundarySkeleton()
    assert rb.min_context_len == 2
    assert rb.context_len((0, 1)) == 2
    assert rb.context_len((1, 1, 1, 0)) == 4
    assert rb.context_len((1, 1)) is None
    # stars extend the run in the worst case
    assert rb.max_context_len((1, STAR, 1, 0)) == 4
    assert rb.max_context_len((STAR, 0, STAR, 1)) == 4

    em = EmptySkeleton()
    assert em.min_context_len == 0
    assert em.context_len((1, 0, 1)) == 0
    assert em.max_context_len((STAR, STAR)) == 0


@given(y=ywindows)
@settings(max_examples=200, deadline=None)
def test_max_len_certified_by_enumeration(y):
    for sk, rule in skeleton_rules():
        assert sk.max_context_len(y) == O.enum_max_len(rule, y, STAR)


@given(
    y=st.lists(st.sampled_from([STAR, 0, 1]), max_size=120),
    offs=st.lists(st.integers(0, 120), max_size=8),
)
@settings(max_examples=80, deadline=None)
def test_block_scan_matches_pointwise(y, offs):
    y_blk = np.asarray(y, dtype=np.int8)
    offs = np.asarray([o for o in offs if o <= len(y)], dtype=np.int64)
    for sk, _ in skeleton_rules():
        want = np.array(
            [float(sk.max_context_len(y_blk[:o][::-1])) for o in offs]
        )
        got = sk.block_context_lens(y_blk, offs)
        assert np.array_equal(got, want)


def test_context_law_closed_forms():
    em = EmptySkeleton()
    pmf = em.c_pmf([0.4, 0.3], 5)
    assert pmf[0] == 1.0 and pmf[1:].sum() == 0.0

    p0, p1 = 0.3, 0.25
    lo = LastOneSkeleton().c_pmf([p0, p1], 2000)
    assert lo[0] == 0.0
    assert lo[1] == p1
    assert float(lo.sum()) == pytest.approx(1.0, abs=1e-12)

    rb = RunBoundarySkeleton().c_pmf([p0, p1], 4000)
    assert rb[0] == 0.0 and rb[1] == 0.0
    assert float(rb.sum()) == pytest.approx(1.0, abs=1e-9)

    assert ProportionSkeleton(0.5).c_pmf([p0, p1], 10) is None


def test_context_law_matches_simulation():
    # draw i.i.d. certain-symbol views and measure the worst-case length
    p0, p1 = 0.3, 0.25
    n, span = 200_000, 256
    rng = np.random.default_rng(17)
    u = rng.random((n, span))
    y = np.where(u < p0, 0, np.where(u < p0 + p1, 1, STAR)).astype(np.int8)

    first_plus = np.argmax(y == 1, axis=1)
    has = (y == 1).any(axis=1)
    lens_lo = np.where(has, first_plus + 1, 10**9)

    certain = y != STAR
    fc = np.argmax(certain, axis=1)
    val = y[np.arange(n), fc]
    differs = certain & (y != val[:, None])
    has2 = differs.any(axis=1)
    lens_rb = np.where(has2, np.argmax(differs, axis=1) + 1, 10**9)

    for sk, lens in ((LastOneSkeleton(), lens_lo), (RunBoundarySkeleton(), lens_rb)):
        pmf = sk.c_pmf([p0, p1], 16)
        for j in range(sk.min_context_len, 13):
            k = int((lens == j).sum())
            sd = math.sqrt(n * pmf[j] * (1 - pmf[j]))
            assert abs(k - n * pmf[j]) < 5 * sd + 1, (type(sk).__name__, j)


# ---------------------------------------------------------------------------
# detectors


class ArrayWin:
    """Backs the window interface with a fixed array starting at index lo."""

    def __init__(self, arr, lo):
        self.arr = np.asarray(arr, dtype=np.int8)
        self.lo = lo

    def y_at(self, i):
        j = i - self.lo
        if j < 0:
            raise IndexError("scan ran past the backing array")
        return int(self.arr[j])

    def y_block(self, a, b):
        if a - self.lo < 0:
            raise IndexError("scan ran past the backing array")
        return self.arr[a - self.lo : b - self.lo]


def test_trivial_detector():
    d = TrivialDetector()
    assert d.find(lambda i: STAR, 17) == 17
    assert d.tail(0, [0.5, 0.4]) == (1.0, True)
    assert d.tail(3, [0.5, 0.4]) == (0.0, True)
    assert d.mean_abs([0.5, 0.4]) == (0.0, True)


def test_pattern_detector_anchor_is_oldest_index():
    d = CertainPatternDetector([(0, 1)])
    #       idx: 0  1  2  3  4  5  6
    arr = [0, 1, 0, STAR, 1, 1, 0]
    win = ArrayWin(arr, 0)
    assert d.find(win.y_at, 6) == 0  # (STAR,1) does not match
    d1 = CertainPatternDetector([(1,)])
    assert d1.find(win.y_at, 6) == 5
    assert d1.find(win.y_at, 3) == 1
    with pytest.raises(ValueError):
        CertainPatternDetector([])
    with pytest.raises(ValueError):
        CertainPatternDetector([(0, 1), (1,)])


@given(
    tail=st.lists(st.sampled_from([STAR, 0, 1]), min_size=30, max_size=90),
    pat=st.sampled_from([((1,),), ((0, 1), (1, 0)), ((1, 1),)]),
)
@settings(max_examples=120, deadline=None)
def test_pattern_find_in_matches_reference(tail, pat):
    d = CertainPatternDetector(pat)
    # plant one occurrence near the top so neither scan leaves the backing
    arr = list(pat[0]) * 200 + tail[: len(tail) // 2] + list(pat[0]) + tail[len(tail) // 2 :]
    win = ArrayWin(arr, -len(arr))
    m = -1
    assert d.find_in(win, m) == d.find(win.y_at, m)


def test_pattern_find_in_chunk_boundary():
    # the only occurrence straddles the first 128-wide scan chunk
    d = CertainPatternDetector([(1, 1)])
    m = 0
    arr = np.zeros(400, dtype=np.int8)
    win = ArrayWin(arr, m - 399)
    arr[399 - 128] = 1
    arr[399 - 129] = 1  # occurrence at indices m-129, m-128
    assert d.find(win.y_at, m) == m - 129
    assert d.find_in(win, m) == m - 129


def test_pattern_tail_single_symbol_exact():
    d = CertainPatternDetector([(1,)])
    masses = [0.3, 0.25]
    for n in range(1, 10):
        val, exact = d.tail(n, masses)
        assert exact
        assert val == (1 - 0.25) ** n
    mean, exact = d.mean_abs(masses)
    assert exact
    assert mean == 0.75 / 0.25
    assert theta_bar_tail(d, 3, masses) == d.tail(3, masses)


def test_pattern_tail_bounds_hold_for_pairs():
    d = CertainPatternDetector([(0, 1), (1, 0)])
    p0, p1 = 0.3, 0.25
    n_rep, span = 4000, 800
    rng = np.random.default_rng(23)
    u = rng.random((n_rep, span))
    y = np.where(u < p0, 0, np.where(u < p0 + p1, 1, STAR)).astype(np.int8)
    y[:, :2] = (0, 1)  # guarantee a hit inside the backing
    dist = np.empty(n_rep)
    for r in range(n_rep):
        win = ArrayWin(y[r], -span + 1)
        dist[r] = -d.find(win.y_at, 0)
    for n in range(1, 9):
        bound, exact = d.tail(n, [p0, p1])
        assert not exact
        emp = float((dist >= n).mean())
        assert emp <= bound + 3 * math.sqrt(bound * (1 - bound) / n_rep) + 1e-9
    mb, exact = d.mean_abs([p0, p1])
    assert not exact
    assert dist.mean() <= mb + 3 * dist.std() / math.sqrt(n_rep)


def test_proportion_detector_reference():
    d = ProportionDetector(0.4)
    with pytest.raises(ValueError):
        ProportionDetector(1.0)
    #      idx: -5 -4 -3 -2 -1  0
    arr = [1, 1, 1, STAR, 0, 0]
    win = ArrayWin(arr, -5)
    # ones walking back from 0: 0/1, 0/2, 0/3 (star), 1/4, then 2 >= 0.4 * 5
    assert d.find(win.y_at, 0) == -4
    assert arr[1] == 1  # the anchor itself is a certain plus


@given(tail=st.lists(st.sampled_from([STAR, 0, 1]), min_size=10, max_size=200))
@settings(max_examples=120, deadline=None)
def test_proportion_find_in_matches_reference(tail):
    d = ProportionDetector(0.4)
    arr = [1] * 300 + tail  # dense plus run bounds the lookback
    win = ArrayWin(arr, -len(arr) + 1)
    for m in (0, -1, -len(tail) // 2):
        got = d.find_in(win, m)
        assert got == d.find(win.y_at, m)
        assert win.y_at(got) == 1


def test_proportion_tail_bound():
    d = ProportionDetector(0.4)
    assert d.tail(5, [0.5, 0.3]) == (1.0, False)  # plus mass below sigma
    val, exact = d.tail(6, [0.2, 0.6])
    assert not exact
    kl = 0.4 * math.log(0.4 / 0.6) + 0.6 * math.log(0.6 / 0.4)
    assert val == pytest.approx(math.exp(-6 * kl))
    assert d.mean_abs([0.2, 0.6]) is None

    # bound dominates simulation
    p0, p1 = 0.2, 0.6
    n_rep, span = 4000, 400
    rng = np.random.default_rng(29)
    u = rng.random((n_rep, span))
    y = np.where(u < p0, 0, np.where(u < p0 + p1, 1, STAR)).astype(np.int8)
    y[:, :40] = 1
    dist = np.empty(n_rep)
    for r in range(n_rep):
        win = ArrayWin(y[r], -span + 1)
        dist[r] = -d.find(win.y_at, 0)
    for n in range(1, 8):
        bound, _ = d.tail(n, [p0, p1])
        emp = float((dist >= n).mean())
        assert emp <= min(bound, 1.0) + 3 * math.sqrt(bound * (1 - bound) / n_rep) + 1e-9


def test_good_coalescence_time_dispatch():
    d = CertainPatternDetector([(1,)])
    arr = [1] + [0] * 127  # long enough for one full chunked scan
    win = ArrayWin(arr, -127)
    assert good_coalescence_time(d, win, 0) == -127
    assert good_coalescence_time(d, win.y_at, 0) == -127
