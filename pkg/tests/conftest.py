"""Shared kernel menagerie used across the suite."""

import pytest

from exactchain import (
    BinaryAR,
    MajorityKernel,
    MarkovEmbedded,
    ParityAR,
    ProportionKernel,
    RenewalMixture,
    RunLengthKernel,
    SignChangeKernel,
)

MARKOV_TABLE = [[0.9, 0.1], [0.2, 0.8]]


def make_builtins():
    """One representative per family, default parameters throughout."""
    return {
        "markov": MarkovEmbedded(MARKOV_TABLE),
        "ar": BinaryAR(),
        "proportion": ProportionKernel(),
        "renewal": RenewalMixture(),
        "parity": ParityAR(),
        "majority": MajorityKernel(),
        "runlength": RunLengthKernel(),
        "signchange": SignChangeKernel(),
    }


@pytest.fixture(scope="session")
def builtins():
    return make_builtins()


@pytest.fixture(params=sorted(make_builtins()))
def any_kernel(request, builtins):
    return builtins[request.param]
