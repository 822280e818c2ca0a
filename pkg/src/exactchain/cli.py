"""Command line front end for sampling and the diagnostic reports.

Configuration comes from an optional TOML file overlaid by flags; unknown
keys or sections anywhere in the file are rejected by name rather than
ignored, so a typo cannot silently fall back to a default.  Every output
embeds the schema version, the library version and the full effective
configuration, which makes any report reproducible from its own header.

Exit codes: 0 success, 2 configuration or usage error, 3 a replica hit
the lookback cap, 4 a verification run concluded with a failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np
import tomli

from . import __version__
from . import kernels as kr
from . import skeletons as sk
from .analysis import (
    a_sequence,
    estimate_tail,
    extract_regeneration,
    verify_compatibility,
)
from .engine import (
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MAX_STEPS,
    DepthExceeded,
    Pairing,
    default_pairing,
    sample_window,
)
from .streams import RandomStream

__all__ = ["ConfigError", "RunConfig", "main"]

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """A configuration value violates its constraint; message names it."""


# ---------------------------------------------------------------------------
# kernel and pairing construction

def _need(params: dict, key: str, family: str):
    if key not in params:
        raise ConfigError(f"kernel family {family!r} requires {key!r}")
    return params.pop(key)


def _weights(params: dict, prefix: str, default: tuple[float, float]):
    lam = params.pop(prefix + "_lam", default[0])
    rho = params.pop(prefix + "_rho", default[1])
    return kr.GeometricWeights(float(lam), float(rho))


def _build_markov(p):
    return kr.MarkovEmbedded(_need(p, "table", "markov"))


def _build_ar(p):
    theta0 = float(p.pop("theta0", 0.0))
    return kr.BinaryAR(theta0, _weights(p, "w", (0.3, 0.5)))


def _build_proportion(p):
    return kr.ProportionKernel(
        sigma=float(p.pop("sigma", 0.3)),
        b1=float(p.pop("b1", 0.7)),
        c=float(p.pop("c", 0.5)),
        beta=_weights(p, "beta", (0.5, 0.5)),
        gamma=_weights(p, "gamma", (0.25, 0.5)),
    )


def _build_renewal(p):
    eps = float(p.pop("eps", 0.25))
    if "q_table" in p and "q_power" in p:
        raise ConfigError("renewal takes q_power or q_table, not both")
    if "q_table" in p:
        q = kr.TableQ([float(x) for x in p.pop("q_table")])
    else:
        q = kr.PowerGeometricQ(float(p.pop("q_power", 0.4)))
    return kr.RenewalMixture(eps=eps, q=q)


def _build_parity(p):
    odd = (float(p.pop("odd_theta0", 0.3)), _weights(p, "odd", (0.5, 0.4)))
    even = (float(p.pop("even_theta0", -0.2)), _weights(p, "even", (0.3, 0.5)))
    return kr.ParityAR(odd=odd, even=even)


def _build_majority(p):
    window = kr.OddWindow(int(p.pop("slope", 1)), int(p.pop("stretch", 16)))
    return kr.MajorityKernel(
        eps=float(p.pop("eps", 0.24)),
        levels=tuple(float(x) for x in p.pop("levels", (0.25, 0.255))),
        window=window,
    )


def _build_runlength(p):
    eps = float(p.pop("eps", 0.2))
    power = p.pop("power", None)
    f = None
    if power is not None:
        f = kr.CeilPowerF(float(power), math.ceil(1.0 / (1.0 - 2.0 * eps)))
    return kr.RunLengthKernel(eps=eps, f=f)


def _build_signchange(p):
    decay = p.pop("decay", None)
    f = kr.ExpDecay(float(decay)) if decay is not None else None
    return kr.SignChangeKernel(_weights(p, "w", (0.15, 0.5)), f=f)


_FAMILIES = {
    "markov": _build_markov,
    "ar": _build_ar,
    "proportion": _build_proportion,
    "renewal": _build_renewal,
    "parity": _build_parity,
    "majority": _build_majority,
    "runlength": _build_runlength,
    "signchange": _build_signchange,
}


def build_kernel(family: str, params: dict) -> kr.Kernel:
    """Construct a kernel from config data; rejects unknown parameters."""
    builder = _FAMILIES.get(family)
    if builder is None:
        raise ConfigError(
            f"unknown kernel family {family!r}; known: {sorted(_FAMILIES)}"
        )
    left = dict(params)
    try:
        kernel = builder(left)
    except kr.KernelError as exc:
        raise ConfigError(f"kernel parameters rejected: {exc}") from exc
    if left:
        raise ConfigError(
            f"unknown parameter(s) for kernel family {family!r}: {sorted(left)}"
        )
    return kernel


def build_pairing(kernel: kr.Kernel, spec: dict | None) -> Pairing:
    """Pairing from a config section, or the kernel's default one."""
    if spec is None:
        return default_pairing(kernel)
    p = dict(spec)
    skel_name = p.pop("skeleton", None)
    det_name = p.pop("detector", None)
    ext = bool(p.pop("ext", False))
    if skel_name is None or det_name is None:
        raise ConfigError("pairing section needs both skeleton and detector")
    if skel_name == "empty":
        skel = sk.EmptySkeleton()
    elif skel_name == "lastone":
        skel = sk.LastOneSkeleton()
    elif skel_name == "proportion":
        skel = sk.ProportionSkeleton(float(p.pop("sigma", 0.3)))
    elif skel_name == "runboundary":
        skel = sk.RunBoundarySkeleton()
    else:
        raise ConfigError(f"unknown skeleton {skel_name!r}")
    if det_name == "trivial":
        det = sk.TrivialDetector()
    elif det_name == "pattern":
        pats = p.pop("patterns", None)
        if pats is None:
            raise ConfigError("pattern detector needs patterns")
        det = sk.CertainPatternDetector([tuple(int(s) for s in q) for q in pats])
    elif det_name == "proportion":
        det = sk.ProportionDetector(float(p.pop("detector_sigma", 0.3)))
    else:
        raise ConfigError(f"unknown detector {det_name!r}")
    if p:
        raise ConfigError(f"unknown pairing key(s): {sorted(p)}")
    return Pairing(skel, det, ext=ext)


# ---------------------------------------------------------------------------
# run configuration

def _parse_span(value, what: str) -> tuple[int, int]:
    if isinstance(value, str):
        parts = value.split("..")
        if len(parts) != 2:
            raise ConfigError(f"{what} must look like A..B, got {value!r}")
        try:
            lo, hi = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"{what} bounds must be integers, got {value!r}")
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        lo, hi = int(value[0]), int(value[1])
    else:
        raise ConfigError(f"{what} must be A..B or a two-element list")
    if lo > hi:
        raise ConfigError(f"{what} start {lo} exceeds end {hi}")
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs of one command invocation."""

    kernel_family: str
    kernel_params: dict = field(default_factory=dict)
    pairing: dict | None = None
    max_steps: int = DEFAULT_MAX_STEPS
    max_blocks: int = DEFAULT_MAX_BLOCKS
    seed: int | None = None
    seeds: tuple[int, int] | None = None
    window: tuple[int, int] = (0, 0)
    replicas: int | None = None
    horizon: int = 200
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.max_steps < 1 or self.max_blocks < 1:
            raise ConfigError("engine caps must be positive")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.replicas is not None and self.replicas < 0:
            raise ConfigError(f"replicas cannot be negative, got {self.replicas}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.window[0] > self.window[1]:
            raise ConfigError(
                f"window start {self.window[0]} exceeds end {self.window[1]}"
            )

    def to_dict(self) -> dict:
        kern = {"family": self.kernel_family, **self.kernel_params}
        run = {
            "seed": self.seed,
            "seeds": None if self.seeds is None else list(self.seeds),
            "window": list(self.window),
            "replicas": self.replicas,
            "horizon": self.horizon,
            "threads": self.threads,
            "out": self.out,
        }
        data = {
            "kernel": kern,
            "engine": {"max_steps": self.max_steps, "max_blocks": self.max_blocks},
            "run": run,
        }
        if self.pairing is not None:
            data["pairing"] = dict(self.pairing)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _config_from_mapping(data)

    def kernel(self) -> kr.Kernel:
        return build_kernel(self.kernel_family, self.kernel_params)

    def make_pairing(self, kernel: kr.Kernel) -> Pairing:
        return build_pairing(kernel, self.pairing)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(range(self.seeds[0], self.seeds[1] + 1))
        if self.replicas is not None:
            return list(range(self.replicas))
        return []


_RUN_KEYS = {"seed", "seeds", "window", "replicas", "horizon", "threads", "out"}
_ENGINE_KEYS = {"max_steps", "max_blocks"}


def _config_from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    kern = dict(data.pop("kernel", {}))
    eng = dict(data.pop("engine", {}))
    run = dict(data.pop("run", {}))
    pairing = data.pop("pairing", None)
    if data:
        raise ConfigError(f"unknown config section(s): {sorted(data)}")
    bad = set(eng) - _ENGINE_KEYS
    if bad:
        raise ConfigError(f"unknown engine key(s): {sorted(bad)}")
    bad = set(run) - _RUN_KEYS
    if bad:
        raise ConfigError(f"unknown run key(s): {sorted(bad)}")
    family = kern.pop("family", None)
    if family is None:
        raise ConfigError("config must name a kernel family")
    # drop explicit nulls an echoed config may carry
    run = {k: v for k, v in run.items() if v is not None}
    seeds = run.get("seeds")
    cfg = RunConfig(
        kernel_family=str(family),
        kernel_params=kern,
        pairing=None if pairing is None else dict(pairing),
        max_steps=int(eng.get("max_steps", DEFAULT_MAX_STEPS)),
        max_blocks=int(eng.get("max_blocks", DEFAULT_MAX_BLOCKS)),
        seed=None if run.get("seed") is None else int(run["seed"]),
        seeds=None if seeds is None else _parse_span(seeds, "seeds"),
        window=_parse_span(run["window"], "window") if "window" in run else (0, 0),
        replicas=None if run.get("replicas") is None else int(run["replicas"]),
        horizon=int(run.get("horizon", 200)),
        threads=int(run.get("threads", 1)),
        out=run.get("out"),
    )
    # constructing the kernel now surfaces bad parameters at parse time
    build_kernel(cfg.kernel_family, cfg.kernel_params)
    if cfg.pairing is not None:
        build_pairing(cfg.kernel(), cfg.pairing)
    return cfg


def _config_from_args(args) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                data = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}")
    run = data.setdefault("run", {})
    if args.seed is not None:
        run["seed"] = args.seed
    if args.seeds is not None:
        run["seeds"] = args.seeds
    if args.window is not None:
        run["window"] = args.window
    if args.replicas is not None:
        run["replicas"] = args.replicas
    if args.threads is not None:
        run["threads"] = args.threads
    if args.out is not None:
        run["out"] = args.out
    if args.max_depth is not None:
        data.setdefault("engine", {})["max_steps"] = args.max_depth
        run["horizon"] = args.max_depth
    if args.kernel is not None:
        data.setdefault("kernel", {})["family"] = args.kernel
    if "kernel" not in data:
        raise ConfigError("no kernel named; use --kernel or a config file")
    return _config_from_mapping(data)


# ---------------------------------------------------------------------------
# output plumbing

def _envelope(cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "library": {"name": "exactchain", "version": __version__},
        "config": cfg.to_dict(),
    }


def _np_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit_json(report: dict, out: str | None):
    text = json.dumps(report, indent=2, default=_np_default)
    if out is None:
        print(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_sample(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("sample needs a single --seed")
    kernel = cfg.kernel()
    res = sample_window(
        kernel,
        RandomStream(cfg.seed),
        window=cfg.window,
        pairing=cfg.make_pairing(kernel),
        max_steps=cfg.max_steps,
        max_blocks=cfg.max_blocks,
    )
    rec = res.record
    sizes = [rec.blocks.bounds(k)[1] - rec.blocks.bounds(k)[0] + 1
             for k in range(len(rec.blocks.starts))]
    sidecar = _envelope(cfg)
    sidecar.update(
        seed=cfg.seed,
        horizon=rec.horizon,
        ties=res.ties,
        coalescence={
            "anchor": rec.anchor,
            "start": rec.start,
            "block_starts": list(rec.blocks.starts),
            "block_charges": list(rec.blocks.charges),
            "block_sizes": sizes,
        },
    )

    lo, hi = cfg.window
    rows = [
        (t, int(res.symbols[t - lo]), int(res.depths[t - rec.start]))
        for t in range(lo, hi + 1)
    ]
    if cfg.out is None:
        w = csv.writer(sys.stdout)
        w.writerow(["index", "symbol", "depth"])
        w.writerows(rows)
        print(json.dumps(sidecar, indent=2, default=_np_default), file=sys.stderr)
    else:
        with open(cfg.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "symbol", "depth"])
            w.writerows(rows)
        _emit_json(sidecar, cfg.out + ".json")
    return 0


def cmd_tail(cfg: RunConfig) -> int:
    seeds = cfg.seed_list()
    if not seeds:
        raise ConfigError("tail needs a non-empty seed set (--seeds or --replicas)")
    kernel = cfg.kernel()
    est = estimate_tail(
        kernel,
        seeds,
        pairing=cfg.make_pairing(kernel),
        max_steps=cfg.max_steps,
        max_blocks=cfg.max_blocks,
        threads=cfg.threads,
    )
    report = _envelope(cfg)
    report.update(
        replicas=est.replicas,
        censored=est.censored,
        censor_frac=est.censor_frac,
        max_n=est.max_n,
        level=est.level,
        survival=est.survival,
        ci_lo=est.ci_lo,
        ci_hi=est.ci_hi,
        slope=est.slope,
        slope_ci=est.slope_ci,
        slope_window=est.slope_window,
        slope_valid=est.slope_valid,
        mean_abs=est.mean_abs,
    )
    _emit_json(report, cfg.out)
    return 0


def cmd_regime(cfg: RunConfig) -> int:
    kernel = cfg.kernel()
    seeds = cfg.seed_list() or None
    rep = a_sequence(
        kernel,
        horizon=cfg.horizon,
        pairing=cfg.make_pairing(kernel),
        seeds=seeds,
        max_steps=cfg.max_steps,
    )
    report = _envelope(cfg)
    report.update(
        mode=rep.mode,
        horizon=rep.horizon,
        regime=rep.regime,
        a=rep.a,
        p_exceed=rep.p_exceed,
        e_theta=rep.e_theta,
        e_theta_ci=list(rep.e_theta_ci),
        e_theta_exact=rep.e_theta_exact,
        c_law=rep.c_law,
        alpha_minus1=rep.alpha_minus1,
        one_minus_sum=rep.one_minus_sum,
        last_increment=rep.last_increment,
        product_sum=rep.product_sum,
        product_tail_ratio=rep.product_tail_ratio,
        decay_slope=rep.decay_slope,
        poly_slope=rep.poly_slope,
    )
    _emit_json(report, cfg.out)
    return 0


def cmd_regen(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("regen needs a single --seed")
    kernel = cfg.kernel()
    res = sample_window(
        kernel,
        RandomStream(cfg.seed),
        window=cfg.window,
        pairing=cfg.make_pairing(kernel),
        max_steps=cfg.max_steps,
        max_blocks=cfg.max_blocks,
    )
    rep = extract_regeneration(res)
    report = _envelope(cfg)
    report.update(
        seed=cfg.seed,
        span=list(rep.span),
        times=rep.times,
        block_lengths=rep.block_lengths,
        n_blocks=rep.n_blocks,
        mean_length=None if rep.n_blocks == 0 else rep.mean_length,
        right_censored=rep.right_censored,
    )
    _emit_json(report, cfg.out)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    seeds = cfg.seed_list()
    if not seeds:
        raise ConfigError("verify needs a non-empty seed set (--seeds or --replicas)")
    kernel = cfg.kernel()
    rep = verify_compatibility(
        kernel,
        seeds,
        pairing=cfg.make_pairing(kernel),
        max_steps=cfg.max_steps,
        max_blocks=cfg.max_blocks,
        threads=cfg.threads,
    )
    report = _envelope(cfg)
    report.update(
        replicas=rep.replicas,
        level=rep.level,
        min_events=rep.min_events,
        passed=rep.passed,
        inconclusive=list(rep.inconclusive),
        probes=[
            {
                "depth": p.depth,
                "suffix": list(p.suffix),
                "events": p.events,
                "p_hat": list(p.p_hat),
                "ci": [list(c) for c in p.ci],
                "bracket": [list(b) for b in p.bracket],
                "ok": p.ok,
            }
            for p in rep.probes
        ],
    )
    _emit_json(report, cfg.out)
    return 0 if rep.passed else 4


_COMMANDS = {
    "sample": cmd_sample,
    "tail": cmd_tail,
    "regime": cmd_regime,
    "regen": cmd_regen,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry point

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--kernel", metavar="FAMILY",
                        help="kernel family: " + ", ".join(sorted(_FAMILIES)))
    common.add_argument("--seed", type=int, metavar="N", help="single stream seed")
    common.add_argument("--seeds", metavar="A..B",
                        help="inclusive seed range for replica commands")
    common.add_argument("--window", metavar="M..N",
                        help="inclusive index window to sample")
    common.add_argument("--replicas", type=int, metavar="R",
                        help="replica count; seeds 0..R-1 unless --seeds is given")
    common.add_argument("--max-depth", type=int, metavar="D",
                        help="lookback cap; also the table horizon for regime")
    common.add_argument("--threads", type=int, metavar="T",
                        help="worker processes for replica farms")
    common.add_argument("--out", metavar="PATH", help="output file")

    ap = argparse.ArgumentParser(
        prog="exactchain",
        description="Exact stationary sampling for chains with infinite memory.",
    )
    ap.add_argument("--version", action="version", version=f"exactchain {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common],
                   help="draw one stationary window as CSV plus a certificate")
    sub.add_parser("tail", parents=[common],
                   help="survival curve of the lookback depth over replicas")
    sub.add_parser("regime", parents=[common],
                   help="coverage sequence and convergence regime verdict")
    sub.add_parser("regen", parents=[common],
                   help="regeneration split of one sampled window")
    sub.add_parser("verify", parents=[common],
                   help="check sampled frequencies against kernel bounds")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DepthExceeded as exc:
        print(f"depth cap: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
