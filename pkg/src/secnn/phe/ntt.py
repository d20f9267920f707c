"""Negacyclic NTT over word-sized prime moduli, vectorized with numpy.

Two regimes:
  * small moduli (< 2^31): products fit int64 directly;
  * ~54-bit moduli of the form q = 2^54 - c with c < 2^27: products are
    folded through 27-bit limbs so every intermediate stays below 2^63.

The 54-bit path is what the ciphertext modulus chain uses; the small
path serves the plaintext slot transform (p < 2^31).
"""

from __future__ import annotations

import numpy as np
import sympy

_M27 = (1 << 27) - 1
_B54 = 1 << 54


def find_ntt_primes(n: int, count: int = 2) -> list[int]:
    """Primes q = 2^54 - c (c < 2^27) with q == 1 (mod 2n), largest first."""
    out = []
    c = 1
    step = 1
    while len(out) < count:
        q = _B54 - c
        if c >= (1 << 27):
            raise ValueError(f"no suitable 54-bit primes for n={n}")
        if q % (2 * n) == 1 and sympy.isprime(q):
            out.append(q)
        c += step
    return out


def primitive_root_2n(q: int, n: int) -> int:
    """Element of exact order 2n mod q (n a power of two, q == 1 mod 2n)."""
    k = (q - 1) // (2 * n)
    for x in range(2, 10000):
        g = pow(x, k, q)
        if pow(g, n, q) == q - 1:
            return g
    raise ValueError(f"no primitive 2n-th root found for q={q}")


def _bitrev_indices(n: int) -> np.ndarray:
    logn = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(logn):
        rev |= ((idx >> b) & 1) << (logn - 1 - b)
    return rev


class NttContext:
    """Forward/inverse negacyclic transform for one modulus."""

    def __init__(self, q: int, n: int):
        if n & (n - 1):
            raise ValueError("n must be a power of two")
        self.q = q
        self.n = n
        self.small = q < (1 << 31)
        if not self.small:
            c = _B54 - q
            if not (0 < c < (1 << 27)):
                raise ValueError(f"large modulus {q} must have the form 2^54 - c, c < 2^27")
            self.c = c
        psi = primitive_root_2n(q, n)
        ipsi = pow(psi, -1, q)
        rev = _bitrev_indices(n)
        powers = np.array([pow(psi, int(i), q) for i in range(n)], dtype=np.int64)
        ipowers = np.array([pow(ipsi, int(i), q) for i in range(n)], dtype=np.int64)
        self.psi_br = powers[rev]
        self.ipsi_br = ipowers[rev]
        self.inv_n = pow(n, -1, q)

    # -- modular multiply -------------------------------------------------

    def mulmod(self, x, y):
        q = self.q
        if self.small:
            return (x * y) % q
        c = self.c
        x1, x0 = x >> 27, x & _M27
        y1, y0 = y >> 27, y & _M27
        t2 = x1 * y1
        t1 = (x1 * y0 + x0 * y1) % q
        t0 = x0 * y0
        u1, u0 = t2 >> 27, t2 & _M27
        v = (t1 + u1 * c) % q
        v1, v0 = v >> 27, v & _M27
        return (v1 * c + (v0 << 27) + u0 * c + t0) % q

    # -- transforms --------------------------------------------------------

    def forward(self, a: np.ndarray) -> np.ndarray:
        """Coefficient form -> evaluation form (internal ordering)."""
        q = self.q
        a = np.asarray(a, dtype=np.int64) % q
        n = self.n
        t = n
        m = 1
        while m < n:
            t //= 2
            blk = a.reshape(m, 2 * t)
            s = self.psi_br[m : 2 * m].reshape(m, 1)
            u = blk[:, :t]
            v = self.mulmod(blk[:, t:], s)
            a = np.concatenate([(u + v) % q, (u - v) % q], axis=1).reshape(-1)
            m *= 2
        return a

    def inverse(self, a: np.ndarray) -> np.ndarray:
        q = self.q
        a = np.asarray(a, dtype=np.int64) % q
        n = self.n
        t = 1
        m = n
        while m > 1:
            h = m // 2
            blk = a.reshape(h, 2 * t)
            s = self.ipsi_br[h : 2 * h].reshape(h, 1)
            u = blk[:, :t]
            v = blk[:, t:]
            a = np.concatenate(
                [(u + v) % q, self.mulmod((u - v) % q, s)], axis=1
            ).reshape(-1)
            t *= 2
            m = h
        return self.mulmod(a, np.int64(self.inv_n))

    def negacyclic_mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Reference product in R_q = Z_q[X]/(X^n + 1), via the transform."""
        return self.inverse(self.mulmod(self.forward(a), self.forward(b)))
