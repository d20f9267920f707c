"""Two-party private CNN inference over packed homomorphic encryption.

The library jointly computes adjacent nonlinear+linear layer pairs from
masked intermediates, which removes every ciphertext rotation from the
linear side and every multiplexer round from the nonlinear side. An
exact operation-counting backend and an analytic cost model make those
eliminations checkable.
"""

from .params import ProtocolParams, ParameterError, default_params, derive_rng
from .ring import (
    RingTensor,
    SharePair,
    fixed_decode,
    fixed_encode,
    local_truncate,
    share,
    share_bits,
    signed_rep,
)

__all__ = [
    "ProtocolParams",
    "ParameterError",
    "default_params",
    "derive_rng",
    "RingTensor",
    "SharePair",
    "fixed_decode",
    "fixed_encode",
    "local_truncate",
    "share",
    "share_bits",
    "signed_rep",
]
