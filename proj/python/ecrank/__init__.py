"""Rank prediction for elliptic curves from normalized Frobenius traces.

Thin python surface over the C++ core: prime tables, a_p computation,
Sato-Tate sampling, the from-scratch 1D CNN, and gradient saliency.
"""

from ecrank._core import (
    Model,
    ap,
    legendre,
    mn_sum,
    param_count,
    primes_up_to,
    sample_sato_tate,
    trace_vector,
    __version__,
)

__all__ = [
    "Model",
    "ap",
    "legendre",
    "mn_sum",
    "param_count",
    "primes_up_to",
    "sample_sato_tate",
    "trace_vector",
    "__version__",
]
