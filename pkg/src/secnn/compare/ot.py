"""Oblivious-transfer comparison backend.

Base OT is a Naor-Pinkas style 1-of-k transfer over a multiplicative
group mod a safe prime (RFC 3526 groups), batched per protocol round so
one message pair serves a whole tensor. On top of it sits a digit-
decomposed millionaires' comparison (4-bit digits by default) and the
sign test over Z_p, which composes three threshold comparisons with a
wrap correction and one shared-AND.

Semi-honest only; no OT extension (every instance costs group ops), so
this backend is for correctness at small scale while the ideal-dealer
backend carries the large tests.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import gmpy2
import numpy as np

from ..transport import MsgType

# RFC 3526 MODP groups 14 and 15 (safe primes, generator 2)
_MODP_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
_MODP_3072 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA05101572 8E5A8AAAC42DAD33170D04507A33"
    "A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7"
    "ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864"
    "D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2"
    "08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A93AD2CAFFFFFFFFFFFFFFFF".replace(" ", ""),
    16,
)


class OtError(Exception):
    pass


@dataclass
class OtGroup:
    prime: int
    nbytes: int
    exp_bits: int

    @staticmethod
    def for_kappa(kappa: int) -> "OtGroup":
        prime = _MODP_2048 if kappa <= 112 else _MODP_3072
        return OtGroup(prime=prime, nbytes=(prime.bit_length() + 7) // 8, exp_bits=2 * kappa)

    def rand_exp(self, rng: np.random.Generator) -> gmpy2.mpz:
        raw = rng.bytes(self.exp_bits // 8)
        return gmpy2.mpz(int.from_bytes(raw, "little") | 1)

    def powg(self, e) -> gmpy2.mpz:
        return gmpy2.powmod(gmpy2.mpz(2), e, self.prime)

    def pow(self, base, e) -> gmpy2.mpz:
        return gmpy2.powmod(base, e, self.prime)

    def inv(self, x) -> gmpy2.mpz:
        return gmpy2.invert(x, self.prime)

    def to_bytes(self, x) -> bytes:
        return int(x).to_bytes(self.nbytes, "little")

    def from_bytes(self, b: bytes) -> gmpy2.mpz:
        return gmpy2.mpz(int.from_bytes(b, "little"))

    def derive_point(self, label: bytes) -> gmpy2.mpz:
        """Group element with unknown discrete log (hashed then squared)."""
        h = b""
        ctr = 0
        while len(h) < self.nbytes + 16:
            h += hashlib.sha256(b"secnn-ot-point" + label + ctr.to_bytes(4, "little")).digest()
            ctr += 1
        x = int.from_bytes(h[: self.nbytes + 16], "little") % self.prime
        return gmpy2.powmod(x, 2, self.prime)


def _key_stream(seed: bytes, length: int) -> bytes:
    out = b""
    ctr = 0
    while len(out) < length:
        out += hashlib.sha256(seed + ctr.to_bytes(4, "little")).digest()
        ctr += 1
    return out[:length]


# ---------------------------------------------------------------------------
# batched 1-of-k base OT
#
# Per batch: receiver publishes one group element per instance; sender
# replies with g^r and k encrypted messages per instance. One round.


def ot_send_batch(group: OtGroup, session, batch_label: bytes, msgs: list[list[bytes]], rng):
    """msgs[i][j]: the j-th message of instance i (equal lengths)."""
    count = len(msgs)
    k = len(msgs[0])
    msg_len = len(msgs[0][0])
    blob = session.recv_tagged(MsgType.OT_BASE)
    if len(blob) != count * group.nbytes:
        raise OtError("bad OT_BASE payload size")
    pk0 = [
        group.from_bytes(blob[i * group.nbytes : (i + 1) * group.nbytes]) for i in range(count)
    ]
    r = group.rand_exp(rng)
    gr = group.powg(r)
    c_pow_r = [group.pow(group.derive_point(batch_label + bytes([j])), r) for j in range(1, k)]
    out = bytearray()
    out += group.to_bytes(gr)
    for i in range(count):
        pk0_r = group.pow(pk0[i], r)
        inv_pk0_r = group.inv(pk0_r)
        for j in range(k):
            key = pk0_r if j == 0 else c_pow_r[j - 1] * inv_pk0_r % group.prime
            seed = hashlib.sha256(
                b"secnn-ot-key" + batch_label + struct.pack("<IB", i, j) + group.to_bytes(key)
            ).digest()
            pad = _key_stream(seed, msg_len)
            out += bytes(a ^ b for a, b in zip(msgs[i][j], pad))
    session.send_tagged(MsgType.OT_EXT, bytes(out))


def ot_recv_batch(
    group: OtGroup, session, batch_label: bytes, choices: list[int], k: int, msg_len: int, rng
) -> list[bytes]:
    count = len(choices)
    xs = [group.rand_exp(rng) for _ in range(count)]
    out = bytearray()
    for i, c in enumerate(choices):
        gx = group.powg(xs[i])
        if c == 0:
            pk0 = gx
        else:
            pk0 = group.derive_point(batch_label + bytes([c])) * group.inv(gx) % group.prime
        out += group.to_bytes(pk0)
    session.send_tagged(MsgType.OT_BASE, bytes(out))
    blob = session.recv_tagged(MsgType.OT_EXT)
    expect = group.nbytes + count * k * msg_len
    if len(blob) != expect:
        raise OtError(f"bad OT_EXT payload size {len(blob)} != {expect}")
    gr = group.from_bytes(blob[: group.nbytes])
    body = blob[group.nbytes :]
    results = []
    for i, c in enumerate(choices):
        key = group.pow(gr, xs[i])
        seed = hashlib.sha256(
            b"secnn-ot-key" + batch_label + struct.pack("<IB", i, c) + group.to_bytes(key)
        ).digest()
        pad = _key_stream(seed, msg_len)
        enc = body[(i * k + c) * msg_len : (i * k + c + 1) * msg_len]
        results.append(bytes(a ^ b for a, b in zip(enc, pad)))
    return results


def ot_1of2_send(group, session, label, pairs: list[tuple[bytes, bytes]], rng):
    ot_send_batch(group, session, label, [[a, b] for a, b in pairs], rng)


def ot_1of2_recv(group, session, label, choices, msg_len, rng) -> list[bytes]:
    return ot_recv_batch(group, session, label, choices, 2, msg_len, rng)


# ---------------------------------------------------------------------------
# shared AND via 1-of-4 OT (client is always the receiver)


def and_shares_server(group, session, label, x_s: np.ndarray, y_s: np.ndarray, rng) -> np.ndarray:
    z_s = rng.integers(0, 2, size=x_s.size, dtype=np.int64)
    msgs = []
    for i in range(x_s.size):
        row = []
        for choice in range(4):
            xc, yc = choice >> 1, choice & 1
            bit = z_s[i] ^ ((int(x_s[i]) ^ xc) & (int(y_s[i]) ^ yc))
            row.append(bytes([bit]))
        msgs.append(row)
    ot_send_batch(group, session, label, msgs, rng)
    return z_s


def and_shares_client(group, session, label, x_c: np.ndarray, y_c: np.ndarray, rng) -> np.ndarray:
    choices = [int(x << 1 | y) for x, y in zip(x_c.tolist(), y_c.tolist())]
    got = ot_recv_batch(group, session, label, choices, 4, 1, rng)
    return np.array([b[0] & 1 for b in got], dtype=np.int64)


# ---------------------------------------------------------------------------
# digit-decomposed millionaires: shares of 1{b < t}
#
# The client holds thresholds t, the server holds values b. Leaf digit
# comparisons ride one 1-of-2^w OT per digit (client sends, server
# chooses); the Horner combine lt = lt_hi xor (eq_hi and lt_lo) walks
# digits LSD to MSD with one shared-AND per step.


def _digits(vals: np.ndarray, k: int, width: int) -> np.ndarray:
    out = np.zeros((k, vals.size), dtype=np.int64)
    v = vals.astype(np.int64).copy()
    mask = (1 << width) - 1
    for i in range(k):
        out[i] = v & mask
        v >>= width
    return out


class MillionaireSession:
    """State for batched comparisons between one client/server lane set."""

    def __init__(self, group: OtGroup, session, rng, digit_width: int = 4):
        self.group = group
        self.session = session
        self.rng = rng
        self.width = digit_width
        self.batch = 0

    def _label(self, what: bytes) -> bytes:
        self.batch += 1
        return what + self.session.session_id + struct.pack("<I", self.batch)

    def client(self, thresholds: np.ndarray, bits: int) -> np.ndarray:
        """Client side; returns client shares of 1{b < t} per lane."""
        t = np.asarray(thresholds, dtype=np.int64)
        k = -(-bits // self.width)
        td = _digits(t, k, self.width)
        kk = 1 << self.width
        lt_c = self.rng.integers(0, 2, size=(k, t.size), dtype=np.int64)
        eq_c = self.rng.integers(0, 2, size=(k, t.size), dtype=np.int64)
        msgs = []
        for lane in range(t.size):
            for dig in range(k):
                row = []
                for j in range(kk):
                    lt_bit = int(lt_c[dig, lane]) ^ (1 if j < td[dig, lane] else 0)
                    eq_bit = int(eq_c[dig, lane]) ^ (1 if j == td[dig, lane] else 0)
                    row.append(bytes([lt_bit | (eq_bit << 1)]))
                msgs.append(row)
        ot_send_batch(self.group, self.session, self._label(b"leaf"), msgs, self.rng)
        # Horner combine, LSD to MSD; client is the AND receiver
        acc = lt_c[0]
        for dig in range(1, k):
            prod = and_shares_client(
                self.group, self.session, self._label(b"and"), eq_c[dig], acc, self.rng
            )
            acc = lt_c[dig] ^ prod
        return acc

    def server(self, values: np.ndarray, bits: int) -> np.ndarray:
        """Server side; returns server shares of 1{b < t} per lane."""
        b = np.asarray(values, dtype=np.int64)
        k = -(-bits // self.width)
        bd = _digits(b, k, self.width)
        choices = [int(bd[dig, lane]) for lane in range(b.size) for dig in range(k)]
        got = ot_recv_batch(
            self.group, self.session, self._label(b"leaf"), choices, 1 << self.width, 1, self.rng
        )
        packed = np.array([v[0] for v in got], dtype=np.int64).reshape(b.size, k).T
        lt_s = packed & 1
        eq_s = (packed >> 1) & 1
        acc = lt_s[0]
        for dig in range(1, k):
            prod = and_shares_server(
                self.group, self.session, self._label(b"and"), eq_s[dig], acc, self.rng
            )
            acc = lt_s[dig] ^ prod
        return acc


# ---------------------------------------------------------------------------
# sign test over Z_p: shares of 1{signed_rep(x) >= 0}
#
# With T = x_C + x_S (an integer below 2p) and h = (p-1)/2:
#   w = 1{T >= p}        (reconstruction wraps)
#   A = 1{T <= h}        (no wrap, value in [0, h])
#   B = 1{T <= p + h}    (wrap case, value - p in [0, h])
# the sign bit is A xor (w and (A xor B)). Each of w, A, B is one
# millionaires' comparison against a client-held threshold.


def drelu_ot_client(x_c: np.ndarray, p: int, mill: MillionaireSession) -> np.ndarray:
    x_c = np.asarray(x_c, dtype=np.int64).reshape(-1)
    h = (p - 1) // 2
    bits = (2 * p).bit_length()
    t_w = p - x_c  # w_raw = 1{x_S < p - x_C}; w = not w_raw
    t_a = np.maximum(h + 1 - x_c, 0)
    t_b = p + h + 1 - x_c
    thresholds = np.concatenate([t_w, t_a, t_b])
    shares = mill.client(thresholds, bits)
    m = x_c.size
    w = shares[:m] ^ 1  # client-side negation of the shared bit
    a = shares[m : 2 * m]
    b = shares[2 * m :]
    prod = and_shares_client(mill.group, mill.session, mill._label(b"fin"), w, a ^ b, mill.rng)
    return a ^ prod


def drelu_ot_server(x_s: np.ndarray, p: int, mill: MillionaireSession) -> np.ndarray:
    x_s = np.asarray(x_s, dtype=np.int64).reshape(-1)
    bits = (2 * p).bit_length()
    values = np.concatenate([x_s, x_s, x_s])
    shares = mill.server(values, bits)
    m = x_s.size
    w = shares[:m]
    a = shares[m : 2 * m]
    b = shares[2 * m :]
    prod = and_shares_server(mill.group, mill.session, mill._label(b"fin"), w, a ^ b, mill.rng)
    return a ^ prod
