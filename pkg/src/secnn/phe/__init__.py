from .core import (
    CT_MAGIC,
    CounterSet,
    CountingBackend,
    LatticeBackend,
    NoiseExhausted,
    OpCounters,
    OwnerMismatch,
    OWNER_CLIENT,
    OWNER_SERVER,
    PackedCiphertext,
    PheError,
    PheKeyMaterial,
    UnsupportedOperation,
    make_backend,
    parse_ct,
    serialize_ct,
)
from .ntt import NttContext, find_ntt_primes

__all__ = [
    "CT_MAGIC",
    "CounterSet",
    "CountingBackend",
    "LatticeBackend",
    "NoiseExhausted",
    "OpCounters",
    "OwnerMismatch",
    "OWNER_CLIENT",
    "OWNER_SERVER",
    "PackedCiphertext",
    "PheError",
    "PheKeyMaterial",
    "UnsupportedOperation",
    "make_backend",
    "parse_ct",
    "serialize_ct",
    "NttContext",
    "find_ntt_primes",
]
