"""Coalescence races, reconstruction, and their exactness guarantees.

The load-bearing properties: a sampled value is a function of the stream
alone (same index, same value, whatever window or filler produced it), the
certificate really is a certificate (recomputing the race reproduces it),
and every budget violation surfaces as DepthExceeded rather than a wrong
answer.
"""

import math

import numpy as np
import pytest

from exactchain import (
    STAR,
    CertainPatternDetector,
    DepthExceeded,
    EngineInvariantError,
    LastOneSkeleton,
    MarkovEmbedded,
    Pairing,
    RandomStream,
    RenewalMixture,
    TrivialDetector,
    block_coalescence,
    continuity_profile,
    default_pairing,
    reconstruct,
    sample_window,
    y_range,
)
from exactchain import engine as eng
from exactchain.kernels import alpha_table


def test_sample_result_layout(builtins):
    k = builtins["renewal"]
    res = sample_window(k, RandomStream(3), window=(-4, 2))
    assert res.window == (-4, 2)
    assert res.record.anchor == 2
    assert res.start == res.record.start
    assert res.record.horizon == res.start - 1
    assert len(res.symbols) == 7
    assert len(res.all_symbols) == 2 - res.start + 1
    assert np.array_equal(res.symbols, res.all_symbols[-4 - res.start :])
    assert res.ties == 0
    assert set(np.unique(res.symbols)) <= {0, 1}


def test_determinism(any_kernel):
    a = sample_window(any_kernel, RandomStream(11), window=(-6, 0))
    b = sample_window(any_kernel, RandomStream(11), window=(-6, 0))
    assert np.array_equal(a.all_symbols, b.all_symbols)
    assert np.array_equal(a.depths, b.depths)
    assert a.record == b.record
    c = sample_window(any_kernel, RandomStream(12), window=(-6, 0))
    assert a.record != c.record or not np.array_equal(a.all_symbols, c.all_symbols)


def test_certain_positions_pass_through(any_kernel):
    k = any_kernel
    for seed in range(6):
        res = sample_window(k, RandomStream(seed), window=(-20, 0))
        ys = y_range(RandomStream(seed), k.thresholds(), res.start, 1)
        certain = ys != STAR
        assert np.array_equal(res.all_symbols[certain], ys[certain])
        assert np.all(res.depths[~certain] >= 1)
        if eng._certain_shortcut_ok(k, k.thresholds()):
            assert np.all(res.depths[certain] == 0)


def test_windows_agree_on_intersections(any_kernel):
    k = any_kernel
    for seed in (0, 1, 2):
        windows = [(-3, 0), (-10, 0), (-10, 5), (0, 0), (-25, -20)]
        results = {w: sample_window(k, RandomStream(seed), window=w) for w in windows}
        for wa in windows:
            for wb in windows:
                lo = max(wa[0], wb[0])
                hi = min(wa[1], wb[1])
                for i in range(lo, hi + 1):
                    va = results[wa].symbols[i - wa[0]]
                    vb = results[wb].symbols[i - wb[0]]
                    assert va == vb, (seed, wa, wb, i)


def test_filler_cannot_leak_through(builtins):
    fillers = [None, lambda i: 0, lambda i: 1, lambda i: abs(i) % 2]
    for name in ("renewal", "proportion", "signchange"):
        k = builtins[name]
        for seed in range(30):
            runs = [
                sample_window(k, RandomStream(seed), window=(-8, 0), filler=f)
                for f in fillers
            ]
            for other in runs[1:]:
                assert np.array_equal(runs[0].all_symbols, other.all_symbols), (
                    name,
                    seed,
                )
                assert np.array_equal(runs[0].depths, other.depths), (name, seed)


def test_race_certificate_structure(any_kernel):
    k = any_kernel
    res = sample_window(k, RandomStream(7), window=(-12, 0))
    blocks = res.record.blocks
    starts = blocks.starts
    charges = blocks.charges
    n = len(starts)
    assert blocks.anchor == 0
    assert starts[-1] == res.start
    assert all(b < a for a, b in zip(starts, starts[1:]))
    # the stopping rule: every block's charge must have been absorbed
    assert max(c + i for i, c in enumerate(charges)) <= n - 1
    assert res.start <= -12
    # block spans tile [start, anchor]
    lo0, hi0 = blocks.bounds(0)
    assert hi0 == 0
    for i in range(n - 1):
        assert blocks.bounds(i)[0] == blocks.bounds(i + 1)[1] + 1
    assert blocks.bounds(n - 1)[0] == res.start


def test_race_matches_detector_replay(builtins):
    # every block start is the detector anchor of the previous block start - 1
    for name in ("renewal", "runlength", "proportion"):
        k = builtins[name]
        pairing = default_pairing(k)
        res = sample_window(k, RandomStream(19), window=(-5, 0))
        stream = RandomStream(19)
        win = eng.StreamWindow(stream, k.thresholds(), res.start - 64, 1)
        prev = res.record.anchor + 1
        for th in res.record.blocks.starts:
            assert th == pairing.detector.find_in(win, prev - 1), name
            prev = th


def test_charge_matches_linear_scan():
    k = RenewalMixture()
    sk = LastOneSkeleton()
    prof = continuity_profile(k, sk)
    rows = eng.AlphaRows(prof, ext=False, store={})
    rng = np.random.default_rng(31)
    table = {c: alpha_table(k, sk, c, 512) for c in (1, 2, 3, 7)}
    for c, row in table.items():
        for u in rng.random(40):
            naive = int(np.argmax(row > u))
            assert rows.charge(float(u), c) == naive
    # zeta short-circuits below the unconditional mass
    am1 = k.alpha_minus1()
    assert eng.zeta(am1 - 1e-9, 3, rows, am1) == 0
    assert eng.zeta(am1 + 1e-9, 3, rows, am1) == rows.charge(am1 + 1e-9, 3)


def test_stream_window_views():
    s = RandomStream(4)
    k = RenewalMixture()
    win = eng.StreamWindow(s, k.thresholds(), -10, 1)
    assert win.u_at(0) == s.uniform_at(0)
    assert np.array_equal(win.u_block(-10, 1), s.uniforms(-10, 1))
    assert np.array_equal(win.y_block(-10, 1), y_range(s, k.thresholds(), -10, 1))
    assert np.array_equal(win.y_rev(-10, 1), win.y_block(-10, 1)[::-1])
    assert win.y_rev(5, 5).size == 0
    # reads below lo extend transparently
    assert win.y_at(-500) == y_range(s, k.thresholds(), -500, -499)[0]
    assert np.array_equal(win.y_rev(-30, -20), win.y_block(-30, -20)[::-1])
    with pytest.raises(ValueError):
        eng.StreamWindow(s, k.thresholds(), 5, 5)


def test_lookback_budget():
    s = RandomStream(4)
    k = RenewalMixture()
    with pytest.raises(DepthExceeded) as ei:
        eng.StreamWindow(s, k.thresholds(), -100, 1, max_steps=30)
    assert ei.value.kind == "lookback"
    win = eng.StreamWindow(s, k.thresholds(), -10, 1, max_steps=64)
    with pytest.raises(DepthExceeded):
        win.y_at(-200)


def test_block_budget():
    # seed 1 opens with a star at the anchor, so one block cannot close
    with pytest.raises(DepthExceeded) as ei:
        block_coalescence(RenewalMixture(), RandomStream(1), anchor=0, max_blocks=1)
    assert ei.value.kind == "blocks"


def test_weak_detector_is_rejected():
    # a trivial detector yields single-slot blocks whose contexts cannot fit
    pairing = Pairing(LastOneSkeleton(), TrivialDetector(), ext=False)
    with pytest.raises(EngineInvariantError):
        block_coalescence(RenewalMixture(), RandomStream(1), anchor=0, pairing=pairing)


def test_argument_validation():
    k = RenewalMixture()
    with pytest.raises(ValueError):
        sample_window(k, RandomStream(0), window=(1, 0))
    with pytest.raises(ValueError):
        block_coalescence(k, RandomStream(0), anchor=0, need_from=5)
    res = sample_window(k, RandomStream(0), window=(0, 0))
    win = eng.StreamWindow(RandomStream(0), k.thresholds(), res.start - 64, 1)
    with pytest.raises(ValueError):
        reconstruct(k, win, res.record, res.start - 1)


def test_reconstruct_with_and_without_shortcut(builtins, monkeypatch):
    # the certain-symbol fast path must be a pure optimization
    for name in ("markov", "renewal", "ar"):
        k = builtins[name]
        base = [
            sample_window(k, RandomStream(seed), window=(-10, 0)).all_symbols
            for seed in range(10)
        ]
        monkeypatch.setattr(eng, "_certain_shortcut_ok", lambda *a: False)
        slow = [
            sample_window(k, RandomStream(seed), window=(-10, 0)).all_symbols
            for seed in range(10)
        ]
        monkeypatch.undo()
        for a, b in zip(base, slow):
            assert np.array_equal(a, b), name


def test_three_symbol_chain():
    rng = np.random.default_rng(41)
    raw = rng.random((3, 3)) + 0.2
    table = raw / raw.sum(axis=1, keepdims=True)
    k = MarkovEmbedded(table)
    assert k.m == 3 and k.order == 1
    res = sample_window(k, RandomStream(8), window=(-30, 0))
    assert set(np.unique(res.all_symbols)) <= {0, 1, 2}
    again = sample_window(k, RandomStream(8), window=(-30, 0))
    assert np.array_equal(res.all_symbols, again.all_symbols)


def test_ext_race_closes(builtins):
    # concatenated-context mode is already the default for run-length
    # pairings; the explicit entry point must behave identically
    k = builtins["runlength"]
    rec = eng.block_coalescence_ext(k, RandomStream(13), anchor=0, need_from=-5)
    assert rec.start <= -5
    assert max(c + i for i, c in enumerate(rec.blocks.charges)) <= len(rec.blocks.starts) - 1
    plain = block_coalescence(k, RandomStream(13), anchor=0, need_from=-5)
    assert plain == rec

    # profiles without concatenated tables must refuse, not mis-certify
    from exactchain import ProfileUnsupported

    with pytest.raises(ProfileUnsupported):
        eng.block_coalescence_ext(builtins["renewal"], RandomStream(13), anchor=0)
