import numpy as np
import pytest

from secnn.params import ProtocolParams, ParameterError, derive_rng
from secnn.phe import (
    CounterSet,
    CountingBackend,
    LatticeBackend,
    NoiseExhausted,
    OwnerMismatch,
    UnsupportedOperation,
    parse_ct,
    serialize_ct,
)
from secnn.phe.ntt import NttContext, find_ntt_primes

SMALL = ProtocolParams(n=64, p=0)


def naive_negacyclic(a, b, q):
    n = len(a)
    acc = np.zeros(2 * n, dtype=object)
    for i in range(n):
        if a[i]:
            acc[i : i + n] += int(a[i]) * b.astype(object)
    return ((acc[:n] - acc[n:]) % q).astype(np.int64)


@pytest.mark.parametrize("q", [find_ntt_primes(64)[0], 33555073])
def test_ntt_matches_naive_convolution(q):
    ctx = NttContext(q, 64)
    rng = derive_rng(10, f"ntt-{q}")
    for _ in range(5):
        a = rng.integers(0, q, 64, dtype=np.int64)
        b = rng.integers(0, q, 64, dtype=np.int64)
        assert np.array_equal(ctx.negacyclic_mul(a, b), naive_negacyclic(a, b, q))
        assert np.array_equal(ctx.inverse(ctx.forward(a)), a)


@pytest.fixture(scope="module")
def lat():
    return LatticeBackend(SMALL)


@pytest.fixture(scope="module")
def cnt():
    return CountingBackend(SMALL)


def keypair(backend, seed=0):
    return backend.keygen("client", derive_rng(seed, "kg"))


def test_keygen_rejects_bad_batching():
    with pytest.raises(ParameterError):
        # bypass ProtocolParams validation to hit the backend's own check
        bad = ProtocolParams(n=64)
        object.__setattr__(bad, "p", 7)
        CountingBackend(bad)


def test_round_trip_zero_and_random(lat, cnt):
    rng = derive_rng(11, "rt")
    for backend in (lat, cnt):
        key = keypair(backend)
        z = np.zeros(64, dtype=np.int64)
        assert np.array_equal(backend.decrypt(key, backend.encrypt(key, z)), z)
        for _ in range(25):
            v = rng.integers(0, SMALL.p, 64, dtype=np.int64)
            assert np.array_equal(backend.decrypt(key, backend.encrypt(key, v)), v)


def test_wrong_key_garbles(lat):
    rng = derive_rng(12, "wk")
    ka = lat.keygen("client", derive_rng(1, "a"))
    kb = lat.keygen("server", derive_rng(2, "b"))
    hits = 0
    for _ in range(100):
        v = rng.integers(0, SMALL.p, 64, dtype=np.int64)
        if np.array_equal(lat.decrypt(kb, lat.encrypt(ka, v)), v):
            hits += 1
    assert hits == 0


def test_add_sub_identities(lat, cnt):
    rng = derive_rng(13, "addsub")
    for backend in (lat, cnt):
        key = keypair(backend)
        u = rng.integers(0, SMALL.p, 64, dtype=np.int64)
        ct = backend.encrypt(key, u)
        zero = np.zeros(64, dtype=np.int64)
        assert np.array_equal(backend.decrypt(key, backend.add(ct, zero)), u)
        assert np.array_equal(backend.decrypt(key, backend.sub(ct, ct)), zero)
        for _ in range(10):
            w = rng.integers(0, SMALL.p, 64, dtype=np.int64)
            got = backend.decrypt(key, backend.add(ct, w))
            assert np.array_equal(got, (u + w) % SMALL.p)
            ct_w = backend.encrypt(key, w)
            got = backend.decrypt(key, backend.sub(ct, ct_w))
            assert np.array_equal(got, (u - w) % SMALL.p)


def test_mul_plain(lat, cnt):
    rng = derive_rng(14, "mul")
    for backend in (lat, cnt):
        key = keypair(backend)
        u = rng.integers(0, SMALL.p, 64, dtype=np.int64)
        ct = backend.encrypt(key, u)
        ones = np.ones(64, dtype=np.int64)
        assert np.array_equal(backend.decrypt(key, backend.mul_plain(ct, ones)), u)
        assert np.all(backend.decrypt(key, backend.mul_plain(ct, ones * 0)) == 0)
        for _ in range(10):
            w = rng.integers(0, SMALL.p, 64, dtype=np.int64)
            got = backend.decrypt(key, backend.mul_plain(ct, w))
            assert np.array_equal(got, (u * w) % SMALL.p)


def test_owner_mismatch_rejected(lat):
    ka = lat.keygen("client", derive_rng(1, "a"))
    kb = lat.keygen("server", derive_rng(2, "b"))
    v = np.arange(64, dtype=np.int64)
    with pytest.raises(OwnerMismatch):
        lat.add(lat.encrypt(ka, v), lat.encrypt(kb, v))


def test_rotation_counting_only(lat, cnt):
    key = keypair(cnt)
    u = np.arange(64, dtype=np.int64)
    ct = cnt.encrypt(key, u)
    assert np.array_equal(cnt.decrypt(key, cnt.rotate(ct, 0)), u)
    r1 = cnt.rotate(ct, 1)
    assert np.array_equal(cnt.decrypt(key, r1), np.roll(u, -1))
    back = cnt.rotate(r1, 63)
    assert np.array_equal(cnt.decrypt(key, back), u)
    lk = keypair(lat)
    with pytest.raises(UnsupportedOperation):
        lat.rotate(lat.encrypt(lk, u), 1)


def test_counter_snapshots(cnt):
    cs = CounterSet()
    assert cs.snapshot().as_dict() == {k: 0 for k in cs.snapshot().as_dict()}
    key = keypair(cnt)
    v = np.arange(64, dtype=np.int64)
    for _ in range(3):
        cnt.encrypt(key, v, cs)
    snap = cs.snapshot()
    assert snap.enc == 3 and snap.dec == 0


def test_noise_exhaustion(lat, cnt):
    # repeated full-magnitude plaintext multiplies must exhaust the budget
    for backend in (lat, cnt):
        key = keypair(backend)
        v = np.full(64, SMALL.p - 1, dtype=np.int64)
        ct = backend.encrypt(key, v)
        with pytest.raises(NoiseExhausted):
            for _ in range(10):
                ct = backend.mul_plain(ct, v)
                backend.decrypt(key, ct)


def test_noise_survives_protocol_depth():
    # one multiply plus (sigma + d) additions at default parameters
    params = ProtocolParams()
    lat4k = LatticeBackend(params)
    assert all(m.bit_length() == 54 for m in lat4k.moduli)
    key = lat4k.keygen("client", derive_rng(15, "n4k"))
    rng = derive_rng(16, "n4kv")
    v = rng.integers(0, params.p, params.n, dtype=np.int64)
    ct = lat4k.encrypt(key, v)
    ct = lat4k.mul_plain(ct, v)
    for _ in range(8):  # generous sigma + d
        ct = lat4k.add(ct, lat4k.encrypt(key, v))
    assert ct.noise_budget_bits(lat4k) > 0
    assert np.array_equal(
        lat4k.decrypt(key, ct), (v.astype(object) * v + 8 * v) % params.p
    )


def test_backend_equivalence_random_programs(lat, cnt):
    rng = derive_rng(17, "equiv")
    lk, ck = keypair(lat), keypair(cnt)
    for trial in range(4):
        v = rng.integers(0, SMALL.p, 64, dtype=np.int64)
        a, b = lat.encrypt(lk, v), cnt.encrypt(ck, v)
        for _ in range(50):
            op = rng.integers(0, 3)
            w = rng.integers(0, SMALL.p, 64, dtype=np.int64)
            if op == 0:
                a, b = lat.add(a, w), cnt.add(b, w)
            elif op == 1:
                a, b = lat.sub(a, w), cnt.sub(b, w)
            else:
                small = w % 97
                a, b = lat.mul_plain(a, small), cnt.mul_plain(b, small)
                # re-encrypt once the budget cannot absorb another multiply
                if a.noise_budget_bits(lat) < 40:
                    va = lat.decrypt(lk, a)
                    a, b = lat.encrypt(lk, va), cnt.encrypt(ck, cnt.decrypt(ck, b))
        assert np.array_equal(lat.decrypt(lk, a), cnt.decrypt(ck, b))


def test_wire_format(lat, cnt):
    rng = derive_rng(18, "wire")
    for backend in (lat, cnt):
        key = keypair(backend)
        v = rng.integers(0, SMALL.p, 64, dtype=np.int64)
        ct = backend.encrypt(key, v)
        blob = serialize_ct(ct, backend)
        assert blob[:4] == b"PHE1"
        ct2 = parse_ct(blob, backend, ct.noise_bound)
        assert np.array_equal(backend.decrypt(key, ct2), v)
        assert serialize_ct(ct2, backend) == blob
    with pytest.raises(Exception):
        parse_ct(b"XXXX" + blob[4:], cnt)
