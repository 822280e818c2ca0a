"""Distributional diagnostics built on the exact sampler.

Four report families: coverage sequences with a convergence-regime verdict,
survival curves for the backward horizon, regeneration splits of sampled
paths, and frequency checks of sampled windows against the kernel's own
bounds.  Everything here consumes the sampler's outputs or its coverage
tables; nothing feeds back into sampling, so a report can be recomputed
from a seed list at any time.

Replica farms map a seed list through an evaluator and reduce in seed
order, which keeps every report deterministic no matter how many workers
participated.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels as _kr
from . import skeletons as _sk
from .engine import (
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MAX_STEPS,
    DepthExceeded,
    Pairing,
    SampleResult,
    StreamWindow,
    block_coalescence,
    default_pairing,
    sample_window,
)
from .streams import RandomStream

__all__ = [
    "RegimeReport",
    "TailEstimate",
    "RegenerationReport",
    "ProbeResult",
    "VerificationReport",
    "wilson",
    "a_sequence",
    "estimate_tail",
    "extract_regeneration",
    "verify_compatibility",
    "concentration_bound",
]


# ---------------------------------------------------------------------------
# small numerics

_Z = {0.90: 1.6448536269514722, 0.95: 1.959963984540054, 0.99: 2.5758293035489004}


def _zscore(level: float) -> float:
    z = _Z.get(level)
    if z is not None:
        return z
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2.0))


def wilson(k: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    z = _zscore(level)
    z2 = z * z
    p = k / n
    denom = 1.0 + z2 / n
    mid = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return max(0.0, mid - half), min(1.0, mid + half)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """slope, intercept, slope standard error, r squared."""
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    resid = y - slope * x - intercept
    sse = float(np.sum(resid**2))
    syy = float(np.sum((y - ym) ** 2))
    se = math.sqrt(sse / max(n - 2, 1) / sxx)
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    return slope, intercept, se, r2


def _farm(fn, jobs, threads: int) -> list:
    """Map fn over jobs, reducing in job order regardless of worker count."""
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, len(jobs) // (threads * 4))
        return list(pool.map(fn, jobs, chunksize=chunk))


# ---------------------------------------------------------------------------
# coverage sequence and regime verdict

#: OLS fit quality below which a decay fit is not trusted for a verdict.
_FIT_R2 = 0.98
#: stricter bar for the exponential claim; stretched tails reach 0.998
_EXP_R2 = 0.999


@dataclass(frozen=True)
class RegimeReport:
    """Coverage sequence A_0..A_K with a finite-horizon regime verdict.

    The verdict is a certificate at the computed horizon, not a limit
    statement: 'iii' means the tail 1 - A_k decays exponentially over the
    fitted range and the detector lookback has an exponential tail bound,
    'ii' means the tail is summable by fit or has already converged to
    working precision, 'i' means the terms vanish while the partial sums
    keep growing like a harmonic series, and 'inconclusive' is reported
    whenever none of the fits certify anything.
    """

    mode: str  # 'full' | 'ulc' | 'slc' | 'ext'
    horizon: int
    a: np.ndarray
    p_exceed: np.ndarray  # per-depth bound on P(U >= coverage at that depth)
    e_theta: float  # detector lookback mean used in the multiplier
    e_theta_ci: tuple[float, float]
    e_theta_exact: bool
    c_law: str  # 'analytic' | 'simulated' | 'degenerate'
    alpha_minus1: float
    one_minus_sum: float
    last_increment: float
    product_sum: float
    product_tail_ratio: float
    decay_slope: float | None  # OLS on log(1-A_k) vs k over the tail half
    poly_slope: float | None  # OLS on log(1-A_k) vs log k over the tail half
    regime: str  # 'i' | 'ii' | 'iii' | 'inconclusive'


def _mc_theta_mean(kernel, pairing, seeds, level, max_steps):
    thr = kernel.thresholds()
    vals = []
    for seed in seeds:
        win = StreamWindow(RandomStream(seed), thr, -64, 1, max_steps)
        th = pairing.detector.find_in(win, 0)
        vals.append(float(-th))
    arr = np.asarray(vals)
    mean = float(arr.mean())
    half = _zscore(level) * float(arr.std(ddof=1)) / math.sqrt(len(arr))
    return mean, (mean - half, mean + half)


def _mc_c_pmf(kernel, skeleton, seeds, jmax, max_steps):
    thr = kernel.thresholds()
    counts = np.zeros(jmax + 2)
    for seed in seeds:
        stream = RandomStream(seed)
        span = 64
        while True:
            win = StreamWindow(stream, thr, -span, 0, max_steps)
            y_rev = win.y_block(-span, 0)[::-1]
            c = skeleton.max_context_len(y_rev)
            if c != _sk.UNBOUNDED:
                break
            span *= 2
            if span > max_steps:
                raise DepthExceeded(
                    "lookback", max_steps, f"context length at seed {seed} unresolved"
                )
        counts[min(int(c), jmax + 1)] += 1
    return counts[: jmax + 1] / len(seeds), counts[jmax + 1] / len(seeds)


def _resolve_mode(mode, profile, pmf_known, have_seeds):
    if mode != "auto":
        return mode
    if not profile.supports_local:
        return "ext"
    if pmf_known or have_seeds:
        return "full"
    if profile.uniform_alpha(0) is not None:
        return "ulc"
    if profile.slc_h() is not None:
        return "slc"
    raise _kr.ProfileUnsupported(
        f"{type(profile).__name__} offers no route to a coverage sequence "
        "without seeds for the context-length law"
    )


def a_sequence(
    kernel: _kr.Kernel,
    horizon: int,
    pairing: Pairing | None = None,
    mode: str = "auto",
    seeds=None,
    level: float = 0.99,
    tol: float = 1e-6,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> RegimeReport:
    """Coverage sequence A_k = {1 - (E+1) P(U >= coverage)} floored at the
    one-step mass, together with partial-sum diagnostics and a verdict.

    mode 'full' weights per-context-length coverage by the exact or
    simulated context-length law; 'ulc' uses the length-uniform coverage
    infimum; 'slc' only charges context lengths not yet fully pinned at
    each depth; 'ext' uses the concatenated-context tables and is forced
    for kernels that only have those.  'auto' picks the sharpest table
    available.  seeds are only consumed when a needed ingredient has no
    closed form.
    """
    if mode not in ("auto", "full", "ulc", "slc", "ext"):
        raise ValueError(f"unknown mode {mode!r}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if pairing is None:
        pairing = default_pairing(kernel)
    profile = _kr.continuity_profile(kernel, pairing.skeleton)
    masses = kernel.alpha()
    am1 = kernel.alpha_minus1()
    K = int(horizon)

    # detector lookback multiplier; the upper confidence edge keeps a
    # simulated mean from overstating coverage
    hit = pairing.detector.mean_abs(masses)
    if hit is not None:
        e_theta, e_exact = float(hit[0]), bool(hit[1])
        e_ci = (e_theta, e_theta)
        e_used = e_theta
    else:
        if seeds is None:
            raise ValueError(
                "detector has no closed-form lookback mean; pass seeds"
            )
        e_theta, e_ci = _mc_theta_mean(kernel, pairing, seeds, level, max_steps)
        e_exact = False
        e_used = e_ci[1]

    pmf = pairing.skeleton.c_pmf(masses, 0)
    pmf_known = pmf is not None
    mode = _resolve_mode(mode, profile, pmf_known, seeds is not None)

    ks = np.arange(K + 1)
    if mode == "ext":
        p_exc = np.array([1.0 - profile.alpha_bar_k(k, 0) for k in range(K + 1)])
        c_law = "degenerate"
    elif mode == "ulc":
        if profile.uniform_alpha(0) is None:
            raise _kr.ProfileUnsupported(
                f"{type(profile).__name__} has no length-uniform coverage"
            )
        p_exc = np.array([1.0 - profile.uniform_alpha(k) for k in range(K + 1)])
        c_law = "degenerate"
    else:
        # both remaining modes weight by the context-length law
        jmax = 8
        tail_mass = 1.0
        while True:
            if pmf_known:
                pmf = pairing.skeleton.c_pmf(masses, jmax)
                tail_mass = max(0.0, 1.0 - float(pmf.sum()))
                c_law = "analytic"
            else:
                pmf, tail_mass = _mc_c_pmf(
                    kernel, pairing.skeleton, seeds, jmax, max_steps
                )
                c_law = "simulated"
            if tail_mass == 0.0 or jmax >= 1 << 14:
                break
            jmax *= 2
        if mode == "slc":
            pair = profile.slc_h()
            if pair is None:
                raise _kr.ProfileUnsupported(
                    f"{type(profile).__name__} has no pinning-depth map"
                )
            _, hinv = pair
            surv = np.concatenate([pmf[::-1].cumsum()[::-1], [0.0]])
            p_exc = np.empty(K + 1)
            for k in range(K + 1):
                cut = hinv(k)
                # exceedance needs a context at least as long as the first
                # length not yet fully pinned at depth k
                if cut == math.inf:
                    p_exc[k] = tail_mass
                else:
                    p_exc[k] = surv[min(int(cut), jmax + 1)] + tail_mass
        else:
            p_exc = np.empty(K + 1)
            support = np.nonzero(pmf)[0]
            for k in range(K + 1):
                acc = 0.0
                for j in support:
                    acc += pmf[j] * (1.0 - profile.alpha_ki(k, int(j)))
                # any context leaves at least the unconditional mass
                p_exc[k] = acc + tail_mass * (1.0 - am1)

    p_exc = np.clip(p_exc, 0.0, 1.0)
    a = np.maximum(am1, 1.0 - (e_used + 1.0) * p_exc)

    one_minus = 1.0 - a
    prods = np.cumprod(a)
    product_sum = float(prods.sum())
    half = K // 2
    ratio = float(prods[-1] / prods[half]) if prods[half] > 0 else 0.0

    # points sitting on the truncated context-law floor would flatten the
    # decay fit, so keep a clear margin above it
    if mode in ("full", "slc"):
        floor_term = tail_mass * ((1.0 - am1) if mode == "full" else 1.0)
        fit_floor = 10.0 * (e_used + 1.0) * floor_term
    else:
        floor_term = fit_floor = 0.0
    # fit over the later part of the observed descent: fast kernels reach
    # full coverage long before the horizon and slow ones never do, so the
    # window has to follow the data, not the horizon
    positive = ks[1:][one_minus[1:] > fit_floor]
    decay = poly = None
    poly_icpt = 0.0
    decay_r2 = poly_r2 = 0.0
    tail_idx = positive[:0]
    if len(positive):
        kend = int(positive[-1])
        tail_idx = positive[positive >= max(1, kend // 3)]
    span_ok = len(tail_idx) >= 8 and tail_idx[-1] - tail_idx[0] >= 8
    if span_ok:
        logs = np.log(one_minus[tail_idx])
        decay, _, _, decay_r2 = _ols(tail_idx.astype(float), logs)
        poly, poly_icpt, _, poly_r2 = _ols(np.log(tail_idx.astype(float)), logs)

    exp_theta_tail = pairing.detector.tail(1, masses) is not None
    # the exponential claim needs a near-perfect line and must beat the
    # polynomial model; anything bent reads as merely summable
    exp_decay = (
        decay is not None
        and decay < -1e-4
        and decay_r2 > _EXP_R2
        and decay_r2 >= poly_r2
    )
    summable_poly = poly is not None and poly < -1.05 and poly_r2 > _FIT_R2
    # coverage saturated to working precision; only structural saturation
    # may claim more than convergence, rounding can fake the rest
    full_cover = float(p_exc[-1]) <= floor_term * (1.0 + 1e-9)
    fd = profile.finite_depth()
    structurally_finite = fd is not None and fd <= K
    # remainder bound from the observed trailing ratio: once the terms
    # shrink geometrically the partial sums are settled to within it
    last = float(one_minus[-1])
    if last == 0.0:
        remainder = 0.0
    else:
        trail = one_minus[-max(K // 4, 2) :]
        trail = trail[trail > 0]
        r_hat = float(np.max(trail[1:] / trail[:-1])) if len(trail) >= 2 else 1.0
        remainder = last * r_hat / (1.0 - r_hat) if r_hat < 1.0 else math.inf
    converged = remainder < tol
    if (exp_decay or structurally_finite) and exp_theta_tail:
        regime = "iii"
    elif exp_decay or structurally_finite or summable_poly or converged or full_cover:
        regime = "ii"
    elif (
        poly is not None
        and poly_r2 > _FIT_R2
        and abs(poly + 1.0) <= 0.05
        and math.exp(poly_icpt) < 0.99
    ):
        # harmonic-like terms with coefficient under one keep the partial
        # products summing past any bound
        regime = "i"
    else:
        regime = "inconclusive"

    return RegimeReport(
        mode=mode,
        horizon=K,
        a=a,
        p_exceed=p_exc,
        e_theta=e_theta,
        e_theta_ci=e_ci,
        e_theta_exact=e_exact,
        c_law=c_law,
        alpha_minus1=am1,
        one_minus_sum=float(one_minus.sum()),
        last_increment=float(one_minus[-1]),
        product_sum=product_sum,
        product_tail_ratio=ratio,
        decay_slope=decay,
        poly_slope=poly,
        regime=regime,
    )


# ---------------------------------------------------------------------------
# backward-horizon survival


@dataclass(frozen=True)
class TailEstimate:
    """Empirical survival of the backward horizon depth at a fixed time.

    survival[n] estimates P(depth > n) for n = 0..max_n; runs that hit the
    step cap are censored and stay in every numerator, so the curve is a
    slight underestimate of the truth only past the cap.  The slope is an
    ordinary least squares fit of log survival over the deepest decade
    still carrying at least 30 hits and is only a diagnostic; censoring
    above one percent voids it.
    """

    replicas: int
    censored: int
    max_n: int
    survival: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    level: float
    slope: float | None
    slope_ci: tuple[float, float] | None
    slope_window: tuple[int, int] | None
    slope_valid: bool
    mean_abs: float

    @property
    def censor_frac(self) -> float:
        return self.censored / self.replicas


def _depth_one(args) -> float:
    kernel, seed, pairing, max_steps, max_blocks = args
    try:
        rec = block_coalescence(
            kernel,
            RandomStream(seed),
            pairing=pairing,
            max_steps=max_steps,
            max_blocks=max_blocks,
        )
    except DepthExceeded:
        return math.inf
    return float(-rec.horizon)


def estimate_tail(
    kernel: _kr.Kernel,
    seeds,
    pairing: Pairing | None = None,
    max_n: int | None = None,
    level: float = 0.99,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    threads: int = 1,
) -> TailEstimate:
    """Survival curve of the certified lookback depth over a seed list."""
    seeds = list(seeds)
    R = len(seeds)
    if R < 100:
        raise ValueError(f"need at least 100 replicas, got {R}")
    if pairing is None:
        pairing = default_pairing(kernel)
    jobs = [(kernel, s, pairing, max_steps, max_blocks) for s in seeds]
    depths = np.asarray(_farm(_depth_one, jobs, threads))

    finite = depths[np.isfinite(depths)]
    censored = int(R - len(finite))
    if len(finite) == 0:
        raise DepthExceeded("lookback", max_steps, "every replica hit the step cap")
    if max_n is None:
        max_n = int(finite.max())

    ns = np.arange(max_n + 1)
    counts = np.array([int(np.sum(depths > n)) for n in ns])
    surv = counts / R
    ci = np.array([wilson(int(c), R, level) for c in counts])

    slope = slope_ci = window = None
    n_star = int(ns[counts >= 30].max()) if np.any(counts >= 30) else -1
    if n_star >= 0 and surv[n_star] > 0:
        floor = surv[n_star]
        lo = int(np.argmax(surv <= 10.0 * floor))
        pts = ns[lo : n_star + 1]
        if len(pts) >= 3:
            b, _, se, _ = _ols(pts.astype(float), np.log(surv[pts]))
            z = _zscore(level)
            slope, slope_ci = b, (b - z * se, b + z * se)
            window = (int(pts[0]), int(pts[-1]))

    return TailEstimate(
        replicas=R,
        censored=censored,
        max_n=int(max_n),
        survival=surv,
        ci_lo=ci[:, 0],
        ci_hi=ci[:, 1],
        level=level,
        slope=slope,
        slope_ci=slope_ci,
        slope_window=window,
        slope_valid=slope is not None and censored <= 0.01 * R,
        mean_abs=float(finite.mean()),
    )


# ---------------------------------------------------------------------------
# regeneration split


@dataclass(frozen=True)
class RegenerationReport:
    """Renewal times of a sampled path and the blocks between them.

    A time is a renewal when nothing at or after it resolved using symbols
    before it, checked within the observed span only; the trailing block is
    always right-censored because later times could still reach back, and
    the leading block lacks its left edge.  Both are excluded from the
    block lengths.
    """

    span: tuple[int, int]
    times: np.ndarray
    block_lengths: np.ndarray
    right_censored: bool

    @property
    def n_blocks(self) -> int:
        return len(self.block_lengths)

    @property
    def mean_length(self) -> float:
        return float(self.block_lengths.mean()) if self.n_blocks else math.nan


def extract_regeneration(result: SampleResult) -> RegenerationReport:
    """Split one sampled path at the times no later step reaches across."""
    start = result.record.start
    hi = result.window[1]
    idx = np.arange(start, hi + 1)
    reach = idx - result.depths
    # running minimum from the right: the oldest index the future touches
    oldest_future = np.minimum.accumulate(reach[::-1])[::-1]
    times = idx[idx <= oldest_future]
    lengths = np.diff(times) if len(times) > 1 else np.empty(0, dtype=np.int64)
    return RegenerationReport(
        span=(start, hi),
        times=times,
        block_lengths=lengths,
        right_censored=True,
    )


# ---------------------------------------------------------------------------
# compatibility check


@dataclass(frozen=True)
class ProbeResult:
    """One conditional-frequency check at a fixed suffix depth."""

    depth: int
    suffix: tuple[int, ...]  # time order, oldest first
    events: int
    p_hat: tuple[float, ...]
    ci: tuple[tuple[float, float], ...]
    bracket: tuple[tuple[float, float], ...]
    ok: bool | None  # None when too few events to conclude


@dataclass(frozen=True)
class VerificationReport:
    """Window frequencies held against the kernel's own bounds."""

    replicas: int
    level: float
    min_events: int
    probes: tuple[ProbeResult, ...]

    @property
    def passed(self) -> bool:
        return all(p.ok is not False for p in self.probes)

    @property
    def inconclusive(self) -> tuple[int, ...]:
        return tuple(p.depth for p in self.probes if p.ok is None)


def _window_one(args) -> np.ndarray:
    kernel, seed, dmax, pairing, max_steps, max_blocks = args
    res = sample_window(
        kernel,
        RandomStream(seed),
        window=(-dmax, 0),
        pairing=pairing,
        max_steps=max_steps,
        max_blocks=max_blocks,
    )
    return res.symbols


def verify_compatibility(
    kernel: _kr.Kernel,
    seeds,
    depths=(1, 2, 3, 4, 5),
    pairing: Pairing | None = None,
    level: float = 0.99,
    min_events: int = 200,
    slack: float = 1e-12,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    threads: int = 1,
) -> VerificationReport:
    """Check sampled frequencies against the kernel's probability brackets.

    For each probe depth d the most frequent observed suffix is chosen
    using the d symbols before time zero only, so conditioning on it does
    not bias the symbol at zero.  The check passes when the Wilson
    interval of each conditional frequency intersects the bracket between
    the kernel's lower bound and one minus the other symbols' lower
    bounds; a probe with too few events reports None rather than a guess.
    """
    seeds = list(seeds)
    depths = tuple(int(d) for d in depths)
    if not depths or min(depths) < 1:
        raise ValueError("probe depths must be positive")
    dmax = max(depths)
    if pairing is None:
        pairing = default_pairing(kernel)
    jobs = [(kernel, s, dmax, pairing, max_steps, max_blocks) for s in seeds]
    rows = np.asarray(_farm(_window_one, jobs, threads))
    m = kernel.m
    x0 = rows[:, dmax]

    probes = []
    for d in depths:
        past = rows[:, dmax - d : dmax]
        codes = past @ (m ** np.arange(d - 1, -1, -1))
        vals, counts = np.unique(codes, return_counts=True)
        code = int(vals[np.argmax(counts)])
        suffix = tuple((code // m**j) % m for j in range(d - 1, -1, -1))
        mask = codes == code
        n_ev = int(mask.sum())
        w_rev = suffix[::-1]
        lows = [kernel.lower_prob(a, w_rev) for a in range(m)]
        total = math.fsum(lows)
        p_hat, cis, brackets = [], [], []
        ok: bool | None = True
        for a in range(m):
            k = int(np.sum(x0[mask] == a))
            lo, hi = wilson(k, n_ev, level)
            lb, ub = lows[a], 1.0 - (total - lows[a])
            p_hat.append(k / n_ev if n_ev else math.nan)
            cis.append((lo, hi))
            brackets.append((lb, ub))
            if hi < lb - slack or lo > ub + slack:
                ok = False
        if n_ev < min_events:
            ok = None
        probes.append(
            ProbeResult(
                depth=d,
                suffix=suffix,
                events=n_ev,
                p_hat=tuple(p_hat),
                ci=tuple(cis),
                bracket=tuple(brackets),
                ok=ok,
            )
        )
    return VerificationReport(
        replicas=len(seeds),
        level=level,
        min_events=min_events,
        probes=tuple(probes),
    )


# ---------------------------------------------------------------------------
# concentration


def concentration_bound(e_theta: float, epsilon: float, delta_f_sq: float) -> float:
    """Two-sided deviation bound 2 exp(-2 eps^2 / ((1+E)^2 |delta f|^2)).

    delta_f_sq is the squared Euclidean norm of the per-coordinate
    oscillations of the statistic.  Values above one are vacuous but
    returned as computed.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if delta_f_sq <= 0:
        raise ValueError("delta_f_sq must be positive")
    if e_theta < 0:
        raise ValueError("e_theta cannot be negative")
    return 2.0 * math.exp(-2.0 * epsilon**2 / ((1.0 + e_theta) ** 2 * delta_f_sq))
