"""Protocol parameters and deterministic randomness.

All arithmetic in the protocol happens over the plaintext ring Z_p with
n-slot packing. The modulus p must be prime and satisfy p == 1 (mod 2n)
so that the packed-HE slot transform exists, and it must leave enough
headroom above the fixed-point scale (p > 2^(2f+4)) for one
multiplication depth plus accumulation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import sympy

DEFAULT_N = 4096
DEFAULT_F = 6
DEFAULT_KAPPA = 128


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    n: int = DEFAULT_N
    p: int = 0  # 0 means "derive the default for n"
    f: int = DEFAULT_F
    kappa: int = DEFAULT_KAPPA
    seed: int | None = None

    def __post_init__(self):
        if self.p == 0:
            object.__setattr__(self, "p", find_plain_modulus(1 << 25, self.n))
        validate_params(self.n, self.p, self.f)

    @property
    def scale(self) -> int:
        return 1 << self.f

    @property
    def half(self) -> int:
        # largest non-negative canonical representative: (-p/2, p/2]
        return self.p // 2

    def digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(b"secnn-params-v1")
        for v in (self.n, self.p, self.f, self.kappa):
            h.update(int(v).to_bytes(8, "little"))
        return h.digest()


def validate_params(n: int, p: int, f: int) -> None:
    if n < 8 or (n & (n - 1)) != 0:
        raise ParameterError(f"slot count n={n} must be a power of two >= 8")
    if p % (2 * n) != 1:
        raise ParameterError(f"p={p} must satisfy p == 1 (mod 2n={2 * n})")
    if not sympy.isprime(p):
        raise ParameterError(f"p={p} is not prime")
    if p <= (1 << (2 * f + 4)):
        raise ParameterError(f"p={p} too small for f={f}: need p > 2^{2 * f + 4}")


def find_plain_modulus(lower: int, n: int) -> int:
    """Smallest prime p >= lower with p == 1 (mod 2n)."""
    step = 2 * n
    p = lower + (1 - lower) % step  # smallest value >= lower congruent to 1 mod 2n
    while not sympy.isprime(p):
        p += step
    return p


def default_params(seed: int | None = None) -> ProtocolParams:
    return ProtocolParams(seed=seed)


def derive_rng(seed: int | None, label: str) -> np.random.Generator:
    """Seedable generator for one named randomness stream.

    Philox keyed by SHA-256(seed || label); every stream used in the
    protocol is derived this way so a run is reproducible from one seed.
    With seed=None the stream is taken from OS entropy.
    """
    if seed is None:
        return np.random.Generator(np.random.Philox())
    h = hashlib.sha256()
    h.update(b"secnn-rng")
    h.update(int(seed).to_bytes(16, "little", signed=True))
    h.update(label.encode())
    key = int.from_bytes(h.digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
