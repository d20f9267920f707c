"""Fixed-point tensors over Z_p and additive secret sharing.

Values live canonically in [0, p); the signed reading is the
representative in (-p/2, p/2]. Reals are embedded at a given scale
(number of fraction bits): products of two scale-f values sit at scale
2f and get restored by a non-interactive per-share truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OverflowError_(ValueError):
    """Fixed-point magnitude does not fit the ring."""


@dataclass
class RingTensor:
    data: np.ndarray  # int64, canonical in [0, modulus)
    modulus: int
    scale: int = 0  # fraction bits currently encoded

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)

    @property
    def shape(self):
        return self.data.shape

    def copy(self) -> "RingTensor":
        return RingTensor(self.data.copy(), self.modulus, self.scale)

    def reshape(self, *shape) -> "RingTensor":
        return RingTensor(self.data.reshape(*shape), self.modulus, self.scale)

    def flatten(self) -> "RingTensor":
        return RingTensor(self.data.reshape(-1), self.modulus, self.scale)

    def add(self, other: "RingTensor") -> "RingTensor":
        self._check(other)
        return RingTensor((self.data + other.data) % self.modulus, self.modulus, self.scale)

    def sub(self, other: "RingTensor") -> "RingTensor":
        self._check(other)
        return RingTensor((self.data - other.data) % self.modulus, self.modulus, self.scale)

    def mul(self, other: "RingTensor") -> "RingTensor":
        """Elementwise product; scales add."""
        self._check(other, scale=False)
        return RingTensor(
            (self.data * other.data) % self.modulus, self.modulus, self.scale + other.scale
        )

    def neg(self) -> "RingTensor":
        return RingTensor((-self.data) % self.modulus, self.modulus, self.scale)

    def signed(self) -> np.ndarray:
        return signed_rep(self.data, self.modulus)

    def _check(self, other: "RingTensor", scale: bool = True):
        if self.modulus != other.modulus:
            raise ValueError(f"modulus mismatch: {self.modulus} vs {other.modulus}")
        if scale and self.scale != other.scale:
            raise ValueError(f"scale mismatch: {self.scale} vs {other.scale}")


@dataclass
class SharePair:
    """Both halves of an additive sharing, used by harness code and tests.

    Protocol code holds only one side; this pairing exists so oracles can
    reconstruct and so tests can drive both parties in one process.
    """

    client: RingTensor
    server: RingTensor

    def __post_init__(self):
        if self.client.modulus != self.server.modulus:
            raise ValueError("share moduli differ")
        if self.client.shape != self.server.shape:
            raise ValueError("share shapes differ")

    @property
    def modulus(self) -> int:
        return self.client.modulus

    @property
    def shape(self):
        return self.client.shape

    def reconstruct(self) -> RingTensor:
        return self.client.add(self.server)


def fixed_encode(x, p: int, f: int) -> np.ndarray:
    """Embed reals as round(x * 2^f) mod p; negatives map to the upper half."""
    x = np.asarray(x, dtype=np.float64)
    v = np.rint(x * float(1 << f))
    if np.any(np.abs(v) >= p / 2):
        flat = np.abs(v).reshape(-1)
        bad = int(np.argmax(flat))
        raise OverflowError_(
            f"fixed-point overflow at flat index {bad}: |{x.reshape(-1)[bad]}|*2^{f} >= p/2"
        )
    out = v.astype(np.int64) % p
    return out if out.ndim else int(out)


def fixed_decode(e, p: int, f: int):
    return signed_rep(np.asarray(e, dtype=np.int64), p) / float(1 << f)


def signed_rep(e, p: int):
    """Canonical signed representative in (-p/2, p/2]."""
    e = np.asarray(e, dtype=np.int64)
    out = np.where(e > p // 2, e - p, e)
    return out if out.ndim else out[()]


def share(x: RingTensor, rng: np.random.Generator) -> SharePair:
    """Uniform client share; server share is the modular complement."""
    c = rng.integers(0, x.modulus, size=x.shape, dtype=np.int64)
    s = (x.data - c) % x.modulus
    return SharePair(
        RingTensor(c, x.modulus, x.scale), RingTensor(s, x.modulus, x.scale)
    )


def share_bits(bits: np.ndarray, rng: np.random.Generator) -> SharePair:
    """XOR sharing of a 0/1 tensor over Z_2."""
    bits = np.asarray(bits, dtype=np.int64)
    c = rng.integers(0, 2, size=bits.shape, dtype=np.int64)
    s = bits ^ c
    return SharePair(RingTensor(c, 2), RingTensor(s, 2))


def truncate_share(share_data: np.ndarray, p: int, shift_bits: int, role: str) -> np.ndarray:
    """One party's half of the local truncation.

    The client floor-divides its share; the server negates, floor-divides,
    and negates back. Reconstruction then equals floor(value / 2^shift)
    up to +/-1, except a wrap event of probability |signed value| / p.
    """
    share_data = np.asarray(share_data, dtype=np.int64)
    if role == "client":
        return share_data >> shift_bits
    if role == "server":
        return (-((-share_data) % p >> shift_bits)) % p
    raise ValueError(f"unknown role {role!r}")


def local_truncate(s: SharePair, shift_bits: int) -> SharePair:
    p = s.modulus
    new_scale = max(s.client.scale - shift_bits, 0)
    c = truncate_share(s.client.data, p, shift_bits, "client")
    sv = truncate_share(s.server.data, p, shift_bits, "server")
    return SharePair(RingTensor(c, p, new_scale), RingTensor(sv, p, new_scale))


def exact_truncate(v: np.ndarray, p: int, shift_bits: int) -> np.ndarray:
    """Reference truncation: floor division of the signed value (oracle side)."""
    sv = signed_rep(np.asarray(v, dtype=np.int64), p)
    return (sv >> shift_bits) % p


def matmul_mod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """(a @ b) mod p without int64 overflow, for p < 2^31.

    Splits b into 15-bit halves so every partial product stays within
    int64 for any practical inner dimension.
    """
    a = np.asarray(a, dtype=np.int64) % p
    b = np.asarray(b, dtype=np.int64) % p
    b_hi, b_lo = b >> 15, b & 0x7FFF
    return ((a @ b_hi % p) * (1 << 15) + a @ b_lo) % p
