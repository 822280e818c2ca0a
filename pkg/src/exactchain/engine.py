"""Backward coalescence engine and exact reconstruction.

The sampler certifies a finite backward horizon by racing block anchors
against coverage depths, then rebuilds the chain forward through a nested
interval partition of each uniform draw.

Blocks are anchored below the requested window: block 0 ends at the anchor
time, and each next block ends just below the start of the previous one,
with starts chosen by the pairing's detector.  Within a block, every star
position is charged the number of extra pinned symbols its draw would need
(its coverage depth, read off the profile row for the worst-case context
around it).  The race stops at the first block count K such that no block
charges past K, at which point every symbol from the deepest block start
onward is a deterministic function of the uniforms above it.

Reconstruction then walks forward: at each time the uniform is located in
the refinement of the partition by suffix depth, emitting the first symbol
whose accumulated mass captures it.  By construction the certified horizon
makes every location succeed using already-rebuilt symbols only; running
out of history is therefore an invariant violation, not a recoverable
condition, unless the caller injects an explicit filler past (a device for
sensitivity tests, never needed in production).
"""

from __future__ import annotations

import bisect
import math
import weakref
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels as _kr
from . import skeletons as _sk
from .streams import STAR, RandomStream

__all__ = [
    "DEFAULT_MAX_STEPS",
    "DEFAULT_MAX_BLOCKS",
    "DepthExceeded",
    "EngineInvariantError",
    "Pairing",
    "default_pairing",
    "StreamWindow",
    "AlphaRows",
    "PartitionCursor",
    "BlockDecomposition",
    "CoalescenceRecord",
    "zeta",
    "block_coalescence",
    "block_coalescence_ext",
    "reconstruct",
    "SampleResult",
    "sample_window",
]

DEFAULT_MAX_STEPS = 10**6
DEFAULT_MAX_BLOCKS = 10**5


class DepthExceeded(RuntimeError):
    """A configured backward budget ran out before coalescence."""

    def __init__(self, kind: str, limit, detail: str = ""):
        self.kind = kind
        self.limit = limit
        msg = f"{kind} budget exhausted (limit {limit})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EngineInvariantError(RuntimeError):
    """A certified property failed; indicates a broken kernel or pairing."""


@dataclass(frozen=True)
class Pairing:
    """Skeleton, detector and race mode used to coalesce a kernel."""

    skeleton: _sk.Skeleton
    detector: _sk.GoodCoalescenceDetector
    ext: bool = False


def default_pairing(kernel: _kr.Kernel) -> Pairing:
    """The natural pairing for each built-in kernel family."""
    if isinstance(kernel, (_kr.MarkovEmbedded, _kr.BinaryAR)):
        return Pairing(_sk.EmptySkeleton(), _sk.TrivialDetector(), ext=False)
    if isinstance(kernel, _kr.ProportionKernel):
        return Pairing(
            _sk.ProportionSkeleton(kernel.sigma),
            _sk.ProportionDetector(kernel.sigma),
            ext=False,
        )
    if isinstance(kernel, (_kr.RenewalMixture, _kr.ParityAR, _kr.MajorityKernel)):
        return Pairing(
            _sk.LastOneSkeleton(), _sk.CertainPatternDetector([(1,)]), ext=False
        )
    if isinstance(kernel, (_kr.RunLengthKernel, _kr.SignChangeKernel)):
        return Pairing(
            _sk.RunBoundarySkeleton(),
            _sk.CertainPatternDetector([(0, 1), (1, 0)]),
            ext=True,
        )
    raise TypeError(f"no default pairing for {type(kernel).__name__}")


# ---------------------------------------------------------------------------
# stream window


class StreamWindow:
    """Backward-extensible cache of uniforms and their certain-symbol view.

    Covers [lo, hi) with hi fixed; reading below lo grows the cache
    geometrically.  Total span is capped: exceeding it raises DepthExceeded,
    which is the sampler's only honest answer when coalescence will not
    certify within budget.
    """

    def __init__(
        self,
        stream: RandomStream,
        thresholds: np.ndarray,
        lo: int,
        hi: int,
        max_steps: int = DEFAULT_MAX_STEPS,
    ):
        if hi <= lo:
            raise ValueError(f"empty window [{lo}, {hi})")
        self.stream = stream
        self.thresholds = thresholds
        self.hi = hi
        self.max_steps = max_steps
        self.lo = hi  # filled by the initial extension
        self._u = np.empty(0)
        self._y = np.empty(0, dtype=np.int8)
        self._extend(lo)

    def _extend(self, target: int):
        if target >= self.lo:
            return
        span = self.hi - self.lo
        new_lo = min(target, self.hi - max(64, 2 * span))
        if self.hi - new_lo > self.max_steps:
            new_lo = self.hi - self.max_steps
            if new_lo > target:
                raise DepthExceeded(
                    "lookback",
                    self.max_steps,
                    f"index {target} lies {self.hi - target} steps below {self.hi}",
                )
        fresh_u = self.stream.uniforms(new_lo, self.lo)
        from . import backend

        fresh_y = backend.y_fill(fresh_u, self.thresholds)
        self._u = np.concatenate([fresh_u, self._u])
        self._y = np.concatenate([fresh_y, self._y])
        self.lo = new_lo

    def u_at(self, i: int) -> float:
        if i < self.lo:
            self._extend(i)
        return float(self._u[i - self.lo])

    def y_at(self, i: int) -> int:
        if i < self.lo:
            self._extend(i)
        return int(self._y[i - self.lo])

    def u_block(self, lo: int, hi: int) -> np.ndarray:
        """View of U_lo .. U_{hi-1} in time order."""
        if lo < self.lo:
            self._extend(lo)
        return self._u[lo - self.lo : hi - self.lo]

    def y_block(self, lo: int, hi: int) -> np.ndarray:
        """View of Y_lo .. Y_{hi-1} in time order."""
        if lo < self.lo:
            self._extend(lo)
        return self._y[lo - self.lo : hi - self.lo]

    def y_rev(self, lo: int, hi: int) -> np.ndarray:
        """Reversed view of Y_lo .. Y_{hi-1} (most recent first)."""
        if hi <= lo:
            return self._y[:0]
        if lo < self.lo:
            self._extend(lo)
        stop = None if lo == self.lo else lo - 1 - self.lo
        return self._y[hi - 1 - self.lo : stop : -1]


# ---------------------------------------------------------------------------
# coverage rows and the star charge


#: Per-kernel memo of computed coverage rows, shared across races so the
#: tables are paid for once per kernel instance, not once per sample.
_ROW_MEMO: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _row_store(kernel: _kr.Kernel, skeleton: _sk.Skeleton, ext: bool) -> dict:
    try:
        per_kernel = _ROW_MEMO.setdefault(kernel, {})
    except TypeError:
        return {}
    token = (
        type(skeleton).__name__,
        tuple(sorted(vars(skeleton).items())),
        bool(ext),
    )
    return per_kernel.setdefault(token, {})


class AlphaRows:
    """Profile rows cached per worst-case context length.

    Rows grow lazily until they cover the requested uniform; a row that
    plateaus below 1 eventually trips the depth budget instead of looping.
    """

    def __init__(
        self,
        profile: _kr.ContinuityProfile,
        ext: bool,
        max_depth: int = DEFAULT_MAX_STEPS,
        store: dict | None = None,
    ):
        self.profile = profile
        self.ext = ext
        self.max_depth = max_depth
        self._rows: dict[int, list[float]] = {} if store is None else store

    def _fetch(self, c: int, kmax: int) -> list[float]:
        row = (
            self.profile.ext_row(c, kmax) if self.ext else self.profile.row(c, kmax)
        )
        row = list(map(float, row))
        self._rows[c] = row
        return row

    def charge(self, u: float, c: int) -> int:
        """Smallest k whose coverage at context length c exceeds u."""
        row = self._rows.get(c)
        if row is None:
            row = self._fetch(c, 64)
        while row[-1] <= u:
            if len(row) > self.max_depth:
                raise DepthExceeded(
                    "coverage",
                    self.max_depth,
                    f"coverage stuck at {row[-1]} below draw {u}",
                )
            row = self._fetch(c, 2 * len(row))
        return bisect.bisect_right(row, u)


def zeta(u: float, c: int, rows: AlphaRows, alpha_minus1: float) -> int:
    """Coverage depth charged to one draw given its worst-case context."""
    if u < alpha_minus1:
        return 0
    return rows.charge(u, c)


# ---------------------------------------------------------------------------
# block race


@dataclass(frozen=True)
class BlockDecomposition:
    """Block starts and their charges, newest block first."""

    anchor: int
    starts: tuple[int, ...]
    charges: tuple[int, ...]

    def bounds(self, k: int) -> tuple[int, int]:
        """Inclusive time span of block k."""
        top = self.anchor if k == 0 else self.starts[k - 1] - 1
        return self.starts[k], top


@dataclass(frozen=True)
class CoalescenceRecord:
    """Certified backward horizon for one anchored race."""

    anchor: int
    start: int
    blocks: BlockDecomposition

    @property
    def horizon(self) -> int:
        """The index below which the stream was never consulted."""
        return self.start - 1


def _race(
    kernel: _kr.Kernel,
    pairing: Pairing,
    win: StreamWindow,
    anchor: int,
    need_from: int,
    max_blocks: int,
) -> CoalescenceRecord:
    skeleton = pairing.skeleton
    detector = pairing.detector
    profile = _kr.continuity_profile(kernel, skeleton)
    rows = AlphaRows(
        profile,
        pairing.ext,
        max_depth=win.max_steps,
        store=_row_store(kernel, skeleton, pairing.ext),
    )

    starts: list[int] = []
    charges: list[int] = []
    worst = -1  # max over finished blocks of charge + block index
    prev_start = anchor + 1
    k = 0
    while True:
        if k >= max_blocks:
            raise DepthExceeded(
                "blocks", max_blocks, f"race still open at block {k}"
            )
        th = detector.find_in(win, prev_start - 1)
        if th > prev_start - 1:
            raise EngineInvariantError(
                f"detector anchored at {th}, above block end {prev_start - 1}"
            )
        charge = 0
        y_blk = win.y_block(th, prev_start)
        stars = np.nonzero(y_blk == STAR)[0]
        if stars.size:
            # star positions are exactly the draws at or above the certain
            # mass, so every one of them carries a positive coverage charge
            cs = skeleton.block_context_lens(y_blk, stars)
            bad = np.nonzero(~np.isfinite(cs))[0]
            if bad.size:
                raise EngineInvariantError(
                    f"context at {th + int(stars[bad[0]])} not contained in "
                    f"its block [{th}, {prev_start - 1}]; detector too weak "
                    "for skeleton"
                )
            us = win.u_block(th, prev_start)[stars].tolist()
            for u, c in zip(us, cs.astype(np.int64).tolist()):
                z = rows.charge(u, c)
                if z > charge:
                    charge = z
        starts.append(th)
        charges.append(charge)
        if charge + k > worst:
            worst = charge + k
        if worst <= k and th <= need_from:
            return CoalescenceRecord(
                anchor=anchor,
                start=th,
                blocks=BlockDecomposition(anchor, tuple(starts), tuple(charges)),
            )
        prev_start = th
        k += 1


def block_coalescence(
    kernel: _kr.Kernel,
    stream: RandomStream,
    anchor: int = 0,
    need_from: int | None = None,
    pairing: Pairing | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    window: StreamWindow | None = None,
) -> CoalescenceRecord:
    """Race blocks below `anchor` until the horizon covers `need_from`."""
    if pairing is None:
        pairing = default_pairing(kernel)
    if need_from is None:
        need_from = anchor
    if need_from > anchor:
        raise ValueError(f"need_from {need_from} exceeds anchor {anchor}")
    if window is None:
        window = StreamWindow(
            stream, kernel.thresholds(), anchor - 63, anchor + 1, max_steps
        )
    return _race(kernel, pairing, window, anchor, need_from, max_blocks)


def block_coalescence_ext(
    kernel: _kr.Kernel,
    stream: RandomStream,
    anchor: int = 0,
    need_from: int | None = None,
    pairing: Pairing | None = None,
    **kwargs,
) -> CoalescenceRecord:
    """The race in concatenated-context mode regardless of pairing default."""
    if pairing is None:
        pairing = default_pairing(kernel)
    forced = Pairing(pairing.skeleton, pairing.detector, ext=True)
    return block_coalescence(
        kernel, stream, anchor, need_from, pairing=forced, **kwargs
    )


# ---------------------------------------------------------------------------
# forward reconstruction


class PartitionCursor:
    """Locates one uniform in the depth-refined interval partition.

    Depth k carves [0, C_k) into the per-symbol masses available with k
    pinned symbols; the draw resolves at the first depth that captures it.
    Comparisons are exact and intervals are half-open.  The `ties` counter
    tracks draws that fall into float dust between the fsum total and the
    accumulated per-symbol steps; they are resolved deterministically and
    reported, never hidden.
    """

    def __init__(self, kernel: _kr.Kernel):
        self.kernel = kernel
        self.ties = 0

    def resolve(
        self,
        u: float,
        history: Sequence[int],
        filler: Callable[[int], int] | None = None,
        base_index: int | None = None,
        max_fill: int = DEFAULT_MAX_STEPS,
    ) -> tuple[int, int]:
        """(symbol, depth) for a draw at the time just after `history`.

        history is in time order; filler, when given, supplies symbols at
        absolute indices below the constructed range (base_index is the
        absolute index being resolved, required with filler).
        """
        kern = self.kernel
        m = kern.m
        binary = m == 2
        pair = kern.lower_pair
        avail = len(history)
        w: list[int] = []
        lo0p = lo1p = 0.0
        lows_prev = [0.0] * m
        lows: list[float] = lows_prev
        c_prev = 0.0
        k = 0
        while True:
            if binary:
                # two-term sums are correctly rounded, so the plain adds
                # below match the general fsum/step arithmetic bit for bit
                lo0, lo1 = pair(w)
                ck = lo0 + lo1
                if u < ck:
                    s0 = lo0 - lo0p
                    if s0 < 0.0:
                        s0 = 0.0
                    if u < c_prev + s0:
                        return 0, k
                    s1 = lo1 - lo1p
                    if s1 < 0.0:
                        s1 = 0.0
                    if u < c_prev + s0 + s1:
                        return 1, k
                    self.ties += 1
                    return (0 if s0 >= s1 else 1), k
            else:
                lows = [kern.lower_prob(a, w) for a in range(m)]
                ck = math.fsum(lows)
                if u < ck:
                    acc = c_prev
                    steps = [max(0.0, lows[a] - lows_prev[a]) for a in range(m)]
                    for a in range(m):
                        if u < acc + steps[a]:
                            return a, k
                        acc += steps[a]
                    # float dust between fsum and the running sum; resolve to
                    # the widest cell so behavior stays deterministic, and
                    # report it
                    self.ties += 1
                    return int(np.argmax(steps)), k
            if k < avail:
                w.append(history[avail - 1 - k])
            elif filler is not None:
                if base_index is None:
                    raise ValueError("filler requires base_index")
                if k >= max_fill:
                    raise DepthExceeded(
                        "coverage", max_fill, "filler consultation ran away"
                    )
                w.append(filler(base_index - 1 - k))
            else:
                raise EngineInvariantError(
                    f"draw {u} unresolved at depth {k} with only {avail} "
                    "constructed symbols; coalescence certificate violated"
                )
            if binary:
                lo0p = lo0
                lo1p = lo1
            else:
                lows_prev = lows
            c_prev = ck
            k += 1


def _certain_shortcut_ok(kernel: _kr.Kernel, thresholds: np.ndarray) -> bool:
    """Whether depth-0 resolution reproduces the Y quantization bit for bit.

    The partition cursor accumulates the unconditional masses left to right
    while the Y view compares against exactly-summed thresholds; when the two
    cumulative sequences agree exactly, a certain position must resolve to
    its Y symbol at depth 0 and the cursor can be skipped there.
    """
    acc = 0.0
    for a in range(kernel.m):
        acc += max(0.0, kernel.lower_prob(a, ()))
        if acc != float(thresholds[a]):
            return False
    return True


def reconstruct(
    kernel: _kr.Kernel,
    window: StreamWindow,
    record: CoalescenceRecord,
    upto: int,
    filler: Callable[[int], int] | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Rebuild X_start .. X_upto; returns (symbols, depths, ties)."""
    start = record.start
    if upto < start:
        raise ValueError(f"upto {upto} precedes horizon start {start}")
    cursor = PartitionCursor(kernel)
    n = upto - start + 1
    symbols = np.empty(n, dtype=np.int8)
    depths = np.zeros(n, dtype=np.int64)
    history: list[int] = []
    y_blk = window.y_block(start, upto + 1)
    u_blk = window.u_block(start, upto + 1)
    fast = _certain_shortcut_ok(kernel, window.thresholds)
    for pos in range(n):
        sy = int(y_blk[pos])
        if fast and sy >= 0:
            symbols[pos] = sy
            history.append(sy)
            continue
        sym, depth = cursor.resolve(
            float(u_blk[pos]), history, filler=filler, base_index=start + pos
        )
        symbols[pos] = sym
        depths[pos] = depth
        history.append(sym)
    return symbols, depths, cursor.ties


# ---------------------------------------------------------------------------
# one-call sampling


@dataclass(frozen=True)
class SampleResult:
    """A stationary window sample with its certificate and diagnostics."""

    window: tuple[int, int]
    symbols: np.ndarray  # X over the requested window
    record: CoalescenceRecord
    all_symbols: np.ndarray  # X from the horizon start through the anchor
    depths: np.ndarray  # per-step resolution depths, aligned with all_symbols
    ties: int

    @property
    def start(self) -> int:
        return self.record.start


def sample_window(
    kernel: _kr.Kernel,
    stream: RandomStream,
    window: tuple[int, int] = (0, 0),
    pairing: Pairing | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    filler: Callable[[int], int] | None = None,
) -> SampleResult:
    """Exact stationary sample of X over the inclusive index window."""
    t_lo, t_hi = window
    if t_lo > t_hi:
        raise ValueError(f"window [{t_lo}, {t_hi}] is empty")
    if pairing is None:
        pairing = default_pairing(kernel)
    buf = StreamWindow(
        stream, kernel.thresholds(), t_hi - 63, t_hi + 1, max_steps
    )
    record = block_coalescence(
        kernel,
        stream,
        anchor=t_hi,
        need_from=t_lo,
        pairing=pairing,
        max_blocks=max_blocks,
        window=buf,
    )
    symbols, depths, ties = reconstruct(kernel, buf, record, t_hi, filler=filler)
    return SampleResult(
        window=(t_lo, t_hi),
        symbols=symbols[t_lo - record.start :],
        record=record,
        all_symbols=symbols,
        depths=depths,
        ties=ties,
    )
