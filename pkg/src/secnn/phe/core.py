"""Packed homomorphic encryption with two interchangeable backends.

The lattice backend is a leveled scheme over Z_q[X]/(X^n + 1) with an
RNS ciphertext modulus of two ~54-bit primes and plaintext modulus p,
batched through the p == 1 (mod 2n) slot transform. It supports exactly
the operation set the protocol needs: encrypt, decrypt, add, subtract,
and ciphertext-plaintext multiply. There is deliberately no rotation
and no ciphertext-ciphertext multiply, so no evaluation or Galois keys
exist.

The counting backend evaluates the same API on plaintext slot vectors
(plus a rotation op) and is used to verify protocol logic and measure
operation counts.

Noise is tracked by an explicit worst-case bound per ciphertext, never
by decryption probing, so budget numbers are deterministic.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from ..params import ProtocolParams, ParameterError
from .ntt import NttContext, find_ntt_primes

OWNER_CLIENT = "client"
OWNER_SERVER = "server"
_OWNER_CODE = {OWNER_CLIENT: 0, OWNER_SERVER: 1}
_OWNER_NAME = {0: OWNER_CLIENT, 1: OWNER_SERVER}

CT_MAGIC = b"PHE1"

# centered binomial error bound (eta coin pairs, |e| <= eta)
ERR_BOUND = 21


class PheError(Exception):
    pass


class NoiseExhausted(PheError):
    pass


class UnsupportedOperation(PheError):
    pass


class OwnerMismatch(PheError):
    pass


# ---------------------------------------------------------------------------
# operation counters


COUNTER_FIELDS = ("enc", "dec", "add", "mul_plain", "rot", "ciphertexts_sent", "bytes_sent")


@dataclass(frozen=True)
class OpCounters:
    enc: int = 0
    dec: int = 0
    add: int = 0
    mul_plain: int = 0
    rot: int = 0
    ciphertexts_sent: int = 0
    bytes_sent: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(*(getattr(self, f) + getattr(other, f) for f in COUNTER_FIELDS))

    def __sub__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(*(getattr(self, f) - getattr(other, f) for f in COUNTER_FIELDS))

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in COUNTER_FIELDS}


class CounterSet:
    """Mutable counter bag with linearizable increments."""

    def __init__(self):
        self._lock = threading.Lock()
        self._c = {f: 0 for f in COUNTER_FIELDS}

    def bump(self, name: str, by: int = 1):
        with self._lock:
            self._c[name] += by

    def snapshot(self) -> OpCounters:
        with self._lock:
            return OpCounters(**dict(self._c))


# ---------------------------------------------------------------------------
# key material and ciphertexts


@dataclass
class PheKeyMaterial:
    owner: str
    backend: "PheBackend"
    public: object  # backend-specific
    secret: object  # held only by the owner in a real deployment

    @property
    def n(self) -> int:
        return self.backend.n


@dataclass
class PackedCiphertext:
    owner: str
    backend_kind: str
    payload: object
    noise_bound: int
    counter_tag: str = ""  # which party's counter set records ops on it

    def noise_budget_bits(self, backend: "PheBackend") -> int:
        return backend.noise_budget_bits(self.noise_bound)


def _bump(counters: CounterSet | None, name: str, by: int = 1):
    if counters is not None:
        counters.bump(name, by)


# ---------------------------------------------------------------------------
# shared noise model


class _NoiseModel:
    """Worst-case per-op bounds; identical for both backends."""

    def __init__(self, n: int, p: int, q: int):
        self.n = n
        self.p = p
        self.q = q
        self.delta = q // p
        self.fresh = ERR_BOUND * (2 * n + 1) + p

    def after_add_ct(self, b1: int, b2: int) -> int:
        return b1 + b2

    def after_add_plain(self, b: int) -> int:
        return b + self.p

    def after_mul_plain(self, b: int) -> int:
        # the multiplier is a plaintext ring element; its coefficient norm
        # is bounded only by p no matter how small the slot values are
        return b * self.n * self.p

    def budget_bits(self, bound: int) -> int:
        return (self.delta // 2).bit_length() - max(int(bound), 1).bit_length()


# ---------------------------------------------------------------------------
# counting backend


class CountingBackend:
    """Plaintext-semantics PHE used for logic checks and op counting."""

    kind = "counting"

    def __init__(self, params: ProtocolParams, moduli: list[int] | None = None):
        _check_batching(params)
        self.params = params
        self.n = params.n
        self.p = params.p
        self.moduli = list(moduli) if moduli else find_ntt_primes(params.n, 2)
        q = 1
        for m in self.moduli:
            q *= m
        self.noise = _NoiseModel(self.n, self.p, q)

    def keygen(self, owner: str, rng: np.random.Generator) -> PheKeyMaterial:
        del rng
        if owner not in _OWNER_CODE:
            raise ValueError(f"unknown owner {owner!r}")
        return PheKeyMaterial(owner=owner, backend=self, public=None, secret=None)

    def encrypt(self, key: PheKeyMaterial, vec, counters: CounterSet | None = None) -> PackedCiphertext:
        vec = self._check_vec(vec)
        _bump(counters, "enc")
        return PackedCiphertext(key.owner, self.kind, vec.copy(), self.noise.fresh, key.owner)

    def decrypt(self, key: PheKeyMaterial, ct: PackedCiphertext, counters: CounterSet | None = None) -> np.ndarray:
        self._check_ct(ct)
        if self.noise.budget_bits(ct.noise_bound) <= 0:
            raise NoiseExhausted("noise budget exhausted; decryption would be incorrect")
        _bump(counters, "dec")
        return ct.payload.copy()

    def add(self, ct: PackedCiphertext, rhs, counters: CounterSet | None = None) -> PackedCiphertext:
        return self._addsub(ct, rhs, +1, counters)

    def sub(self, ct: PackedCiphertext, rhs, counters: CounterSet | None = None) -> PackedCiphertext:
        return self._addsub(ct, rhs, -1, counters)

    def _addsub(self, ct, rhs, sign, counters) -> PackedCiphertext:
        self._check_ct(ct)
        if isinstance(rhs, PackedCiphertext):
            if rhs.owner != ct.owner:
                raise OwnerMismatch(f"cannot combine {ct.owner} and {rhs.owner} ciphertexts")
            data = (ct.payload + sign * rhs.payload) % self.p
            bound = self.noise.after_add_ct(ct.noise_bound, rhs.noise_bound)
        else:
            vec = self._check_vec(rhs)
            data = (ct.payload + sign * vec) % self.p
            bound = self.noise.after_add_plain(ct.noise_bound)
        _bump(counters, "add")
        return PackedCiphertext(ct.owner, self.kind, data, bound, ct.counter_tag)

    def mul_plain(self, ct: PackedCiphertext, vec, counters: CounterSet | None = None) -> PackedCiphertext:
        self._check_ct(ct)
        vec = self._check_vec(vec)
        data = (ct.payload * vec) % self.p
        bound = self.noise.after_mul_plain(ct.noise_bound)
        _bump(counters, "mul_plain")
        return PackedCiphertext(ct.owner, self.kind, data, bound, ct.counter_tag)

    def rotate(self, ct: PackedCiphertext, ell: int, counters: CounterSet | None = None) -> PackedCiphertext:
        """Cyclic left rotation of the slot vector; counting backend only."""
        self._check_ct(ct)
        if not 0 <= ell < self.n:
            raise ValueError(f"rotation amount {ell} out of range [0, {self.n})")
        _bump(counters, "rot")
        return PackedCiphertext(
            ct.owner, self.kind, np.roll(ct.payload, -ell), ct.noise_bound, ct.counter_tag
        )

    def noise_budget_bits(self, bound: int) -> int:
        return self.noise.budget_bits(bound)

    def _check_vec(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.int64)
        if vec.shape != (self.n,):
            raise ValueError(f"expected {self.n}-slot vector, got shape {vec.shape}")
        return vec % self.p

    def _check_ct(self, ct: PackedCiphertext):
        if ct.backend_kind != self.kind:
            raise PheError(f"ciphertext from backend {ct.backend_kind!r} fed to {self.kind!r}")


# ---------------------------------------------------------------------------
# lattice backend


class LatticeBackend:
    """BFV-style leveled scheme, depth-1 ciphertext-plaintext multiply only.

    Ciphertext polynomials are stored in per-prime evaluation (NTT) form,
    so add and mul_plain are slotwise; only encrypt/decrypt transform.
    Rotation is intentionally unsupported: the protocol never calls it
    and no Galois keys exist.
    """

    kind = "lattice"

    def __init__(self, params: ProtocolParams, moduli: list[int] | None = None):
        _check_batching(params)
        self.params = params
        self.n = params.n
        self.p = params.p
        self.moduli = list(moduli) if moduli else find_ntt_primes(params.n, 2)
        self.ctxs = [NttContext(q, self.n) for q in self.moduli]
        self.plain_ctx = NttContext(self.p, self.n)
        self.q = 1
        for m in self.moduli:
            self.q *= m
        self.noise = _NoiseModel(self.n, self.p, self.q)
        self.delta_mod = [np.int64((self.q // self.p) % q) for q in self.moduli]
        # CRT recombination constants
        self._crt = []
        for q in self.moduli:
            rest = self.q // q
            self._crt.append(rest * pow(rest, -1, q))

    # -- slot transform ----------------------------------------------------

    def slots_to_poly(self, vec: np.ndarray) -> np.ndarray:
        return self.plain_ctx.inverse(vec % self.p)

    def poly_to_slots(self, poly: np.ndarray) -> np.ndarray:
        return self.plain_ctx.forward(poly % self.p)

    # -- keys ----------------------------------------------------------------

    def keygen(self, owner: str, rng: np.random.Generator) -> PheKeyMaterial:
        if owner not in _OWNER_CODE:
            raise ValueError(f"unknown owner {owner!r}")
        s = rng.integers(-1, 2, size=self.n, dtype=np.int64)
        e = _cbd(rng, self.n)
        a_ntt = [
            ctx.forward(rng.integers(0, q, size=self.n, dtype=np.int64))
            for ctx, q in zip(self.ctxs, self.moduli)
        ]
        s_ntt = [ctx.forward(s % q) for ctx, q in zip(self.ctxs, self.moduli)]
        pk0 = [
            (-(ctx.mulmod(a, sk) + ctx.forward(e % q))) % q
            for ctx, q, a, sk in zip(self.ctxs, self.moduli, a_ntt, s_ntt)
        ]
        return PheKeyMaterial(
            owner=owner, backend=self, public=(pk0, a_ntt), secret=s_ntt
        )

    # -- core ops ------------------------------------------------------------

    def encrypt(self, key: PheKeyMaterial, vec, counters: CounterSet | None = None) -> PackedCiphertext:
        vec = self._check_vec(vec)
        rng = getattr(key, "_enc_rng", None)
        if rng is None:
            rng = np.random.Generator(np.random.Philox())
            key._enc_rng = rng
        m_poly = self.slots_to_poly(vec)
        u = rng.integers(-1, 2, size=self.n, dtype=np.int64)
        e1 = _cbd(rng, self.n)
        e2 = _cbd(rng, self.n)
        pk0, pk1 = key.public
        c0, c1 = [], []
        for ctx, q, d, p0, p1 in zip(self.ctxs, self.moduli, self.delta_mod, pk0, pk1):
            u_ntt = ctx.forward(u % q)
            dm = ctx.mulmod(m_poly % q, d)  # delta*m, coefficient domain
            c0.append((ctx.mulmod(p0, u_ntt) + ctx.forward((dm + e1) % q)) % q)
            c1.append((ctx.mulmod(p1, u_ntt) + ctx.forward(e2 % q)) % q)
        _bump(counters, "enc")
        return PackedCiphertext(key.owner, self.kind, (c0, c1), self.noise.fresh, key.owner)

    def decrypt(self, key: PheKeyMaterial, ct: PackedCiphertext, counters: CounterSet | None = None) -> np.ndarray:
        self._check_ct(ct)
        if self.noise.budget_bits(ct.noise_bound) <= 0:
            raise NoiseExhausted("noise budget exhausted; decryption would be incorrect")
        c0, c1 = ct.payload
        residues = [
            ctx.inverse((c0i + ctx.mulmod(c1i, sk)) % q)
            for ctx, q, c0i, c1i, sk in zip(self.ctxs, self.moduli, c0, c1, key.secret)
        ]
        # CRT-combine to [0, q), center, and scale by p/q with rounding
        acc = sum(r.astype(object) * c for r, c in zip(residues, self._crt)) % self.q
        centered = np.where(acc > self.q // 2, acc - self.q, acc)
        m = (centered * self.p * 2 + self.q) // (2 * self.q) % self.p
        _bump(counters, "dec")
        return self.poly_to_slots(m.astype(np.int64))

    def add(self, ct: PackedCiphertext, rhs, counters: CounterSet | None = None) -> PackedCiphertext:
        return self._addsub(ct, rhs, +1, counters)

    def sub(self, ct: PackedCiphertext, rhs, counters: CounterSet | None = None) -> PackedCiphertext:
        return self._addsub(ct, rhs, -1, counters)

    def _addsub(self, ct, rhs, sign, counters) -> PackedCiphertext:
        self._check_ct(ct)
        c0, c1 = ct.payload
        if isinstance(rhs, PackedCiphertext):
            if rhs.owner != ct.owner:
                raise OwnerMismatch(f"cannot combine {ct.owner} and {rhs.owner} ciphertexts")
            d0, d1 = rhs.payload
            n0 = [(a + sign * b) % q for a, b, q in zip(c0, d0, self.moduli)]
            n1 = [(a + sign * b) % q for a, b, q in zip(c1, d1, self.moduli)]
            bound = self.noise.after_add_ct(ct.noise_bound, rhs.noise_bound)
        else:
            vec = self._check_vec(rhs)
            m_poly = self.slots_to_poly(vec)
            n0 = []
            for ctx, q, d, a in zip(self.ctxs, self.moduli, self.delta_mod, c0):
                dm = ctx.forward(ctx.mulmod(m_poly % q, d))
                n0.append((a + sign * dm) % q)
            n1 = [a.copy() for a in c1]
            bound = self.noise.after_add_plain(ct.noise_bound)
        _bump(counters, "add")
        return PackedCiphertext(ct.owner, self.kind, (n0, n1), bound, ct.counter_tag)

    def mul_plain(self, ct: PackedCiphertext, vec, counters: CounterSet | None = None) -> PackedCiphertext:
        self._check_ct(ct)
        vec = self._check_vec(vec)
        m_poly = self.slots_to_poly(vec)
        c0, c1 = ct.payload
        n0, n1 = [], []
        for ctx, q, a, b in zip(self.ctxs, self.moduli, c0, c1):
            m_ntt = ctx.forward(m_poly % q)
            n0.append(ctx.mulmod(a, m_ntt))
            n1.append(ctx.mulmod(b, m_ntt))
        bound = self.noise.after_mul_plain(ct.noise_bound)
        _bump(counters, "mul_plain")
        return PackedCiphertext(ct.owner, self.kind, (n0, n1), bound, ct.counter_tag)

    def rotate(self, ct: PackedCiphertext, ell: int, counters: CounterSet | None = None):
        raise UnsupportedOperation(
            "the lattice backend has no rotation (no Galois keys exist); "
            "a protocol path reaching this is a bug"
        )

    def noise_budget_bits(self, bound: int) -> int:
        return self.noise.budget_bits(bound)

    def _check_vec(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.int64)
        if vec.shape != (self.n,):
            raise ValueError(f"expected {self.n}-slot vector, got shape {vec.shape}")
        return vec % self.p

    def _check_ct(self, ct: PackedCiphertext):
        if ct.backend_kind != self.kind:
            raise PheError(f"ciphertext from backend {ct.backend_kind!r} fed to {self.kind!r}")


PheBackend = CountingBackend | LatticeBackend


def make_backend(kind: str, params: ProtocolParams) -> PheBackend:
    if kind == "counting":
        return CountingBackend(params)
    if kind == "lattice":
        return LatticeBackend(params)
    raise ValueError(f"unknown PHE backend {kind!r}")


def _check_batching(params: ProtocolParams):
    if params.p % (2 * params.n) != 1:
        raise ParameterError(
            f"slot batching requires p == 1 (mod 2n); got p={params.p}, n={params.n}"
        )


def _cbd(rng: np.random.Generator, n: int, eta: int = ERR_BOUND) -> np.ndarray:
    """Centered binomial error: sum of eta coin differences, |e| <= eta."""
    a = rng.integers(0, 2, size=(eta, n), dtype=np.int64).sum(axis=0)
    b = rng.integers(0, 2, size=(eta, n), dtype=np.int64).sum(axis=0)
    return a - b


# ---------------------------------------------------------------------------
# wire format
#
# magic "PHE1" | owner (1 byte) | N (u32 LE) | modulus count (u8) |
# each modulus (u64 LE) | p (u64 LE) | 2 polynomials x modulus-count
# residue vectors of N u64 LE coefficients.
#
# The counting backend serializes with modulus count 1 (the plaintext
# modulus) and an all-zero second polynomial.


def serialize_ct(ct: PackedCiphertext, backend: PheBackend) -> bytes:
    n = backend.n
    if ct.backend_kind == "counting":
        moduli = [backend.p]
        polys = [[ct.payload], [np.zeros(n, dtype=np.int64)]]
    else:
        moduli = backend.moduli
        polys = [list(ct.payload[0]), list(ct.payload[1])]
    out = bytearray()
    out += CT_MAGIC
    out += struct.pack("<B", _OWNER_CODE[ct.owner])
    out += struct.pack("<I", n)
    out += struct.pack("<B", len(moduli))
    for m in moduli:
        out += struct.pack("<Q", m)
    out += struct.pack("<Q", backend.p)
    for poly_set in polys:
        for vec in poly_set:
            out += np.asarray(vec, dtype=np.uint64).tobytes()
    return bytes(out)


def parse_ct(data: bytes, backend: PheBackend, noise_bound: int | None = None) -> PackedCiphertext:
    if data[:4] != CT_MAGIC:
        raise PheError("bad ciphertext magic")
    owner = _OWNER_NAME[data[4]]
    (n,) = struct.unpack_from("<I", data, 5)
    if n != backend.n:
        raise PheError(f"ciphertext slot count {n} != backend {backend.n}")
    k = data[9]
    off = 10
    moduli = []
    for _ in range(k):
        (m,) = struct.unpack_from("<Q", data, off)
        moduli.append(m)
        off += 8
    (p,) = struct.unpack_from("<Q", data, off)
    off += 8
    if p != backend.p:
        raise PheError(f"ciphertext plaintext modulus {p} != backend {backend.p}")
    vecs = []
    for _ in range(2 * k):
        v = np.frombuffer(data, dtype="<u8", count=n, offset=off).astype(np.int64)
        vecs.append(v)
        off += 8 * n
    if off != len(data):
        raise PheError("trailing bytes in ciphertext")
    bound = backend.noise.fresh if noise_bound is None else noise_bound
    if backend.kind == "counting":
        if k != 1 or moduli[0] != backend.p:
            raise PheError("counting-backend ciphertext must carry the plaintext modulus")
        return PackedCiphertext(owner, "counting", vecs[0] % backend.p, bound, owner)
    if moduli != backend.moduli:
        raise PheError("ciphertext modulus chain differs from backend")
    return PackedCiphertext(owner, "lattice", (vecs[:k], vecs[k:]), bound, owner)
