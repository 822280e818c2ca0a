"""Exact stationary sampling for binary chains with infinite memory.

The package draws perfect samples from the stationary law of a chain
specified by its transition kernel, without burn-in, by certifying a finite
backward horizon through a block race over the certain-symbol view of an
indexed uniform stream and then rebuilding the chain forward through nested
interval partitions.  Everything is deterministic in the seed: the same
(seed, kernel, window) always yields the same sample, bit for bit,
regardless of backend or process count.
"""

from .backend import COMPILED
from .streams import STAR, RandomStream, y_at, y_completed, y_range, y_thresholds
from .kernels import (
    BinaryAR,
    CeilPowerF,
    ExpDecay,
    GeometricWeights,
    Kernel,
    KernelError,
    MajorityKernel,
    MarkovEmbedded,
    OddWindow,
    ParityAR,
    PowerDecay,
    PowerGeometricQ,
    PowerLawWeights,
    ProfileUnsupported,
    ProportionKernel,
    RenewalMixture,
    RunLengthKernel,
    SignChangeKernel,
    TableQ,
    alpha_bar_table,
    alpha_table,
    continuity_profile,
)
from .skeletons import (
    UNBOUNDED,
    CertainPatternDetector,
    EmptySkeleton,
    GoodCoalescenceDetector,
    LastOneSkeleton,
    ProportionDetector,
    ProportionSkeleton,
    RunBoundarySkeleton,
    Skeleton,
    TrivialDetector,
    good_coalescence_time,
    theta_bar_tail,
)
from .engine import (
    DEFAULT_MAX_BLOCKS,
    DEFAULT_MAX_STEPS,
    BlockDecomposition,
    CoalescenceRecord,
    DepthExceeded,
    EngineInvariantError,
    Pairing,
    SampleResult,
    block_coalescence,
    block_coalescence_ext,
    default_pairing,
    reconstruct,
    sample_window,
)
from .analysis import (
    RegenerationReport,
    RegimeReport,
    TailEstimate,
    VerificationReport,
    a_sequence,
    concentration_bound,
    estimate_tail,
    extract_regeneration,
    verify_compatibility,
)

__version__ = "0.1.0"

__all__ = [
    "COMPILED",
    "STAR",
    "RandomStream",
    "y_at",
    "y_completed",
    "y_range",
    "y_thresholds",
    "Kernel",
    "KernelError",
    "ProfileUnsupported",
    "MarkovEmbedded",
    "BinaryAR",
    "ProportionKernel",
    "RenewalMixture",
    "ParityAR",
    "MajorityKernel",
    "RunLengthKernel",
    "SignChangeKernel",
    "GeometricWeights",
    "PowerLawWeights",
    "PowerGeometricQ",
    "TableQ",
    "OddWindow",
    "CeilPowerF",
    "ExpDecay",
    "PowerDecay",
    "continuity_profile",
    "alpha_table",
    "alpha_bar_table",
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
    "DEFAULT_MAX_STEPS",
    "DEFAULT_MAX_BLOCKS",
    "DepthExceeded",
    "EngineInvariantError",
    "Pairing",
    "default_pairing",
    "BlockDecomposition",
    "CoalescenceRecord",
    "SampleResult",
    "block_coalescence",
    "block_coalescence_ext",
    "reconstruct",
    "sample_window",
    "RegimeReport",
    "TailEstimate",
    "RegenerationReport",
    "VerificationReport",
    "a_sequence",
    "estimate_tail",
    "extract_regeneration",
    "verify_compatibility",
    "concentration_bound",
    "__version__",
]
