"""Shared independent oracles: naive loop implementations, no packing."""

import numpy as np
import pytest


def brute_conv(a, k, stride, pad, p=None):
    """Textbook strided convolution with zero padding, elementwise loops."""
    c_o, c_i, fh, fw = k.shape
    _, h, w = a.shape
    ho = (h + 2 * pad - fh) // stride + 1
    wo = (w + 2 * pad - fw) // stride + 1
    out = np.zeros((c_o, ho, wo), dtype=object)
    for oc in range(c_o):
        for r in range(ho):
            for c in range(wo):
                s = 0
                for ic in range(c_i):
                    for i in range(fh):
                        for j in range(fw):
                            rr = r * stride + i - pad
                            cc = c * stride + j - pad
                            if 0 <= rr < h and 0 <= cc < w:
                                s += int(a[ic, rr, cc]) * int(k[oc, ic, i, j])
                out[oc, r, c] = s % p if p is not None else s
    return out.astype(np.int64)


def brute_dot(w, a, p=None):
    n_o, n_i = w.shape
    out = np.zeros(n_o, dtype=object)
    for j in range(n_o):
        s = 0
        for lam in range(n_i):
            s += int(w[j, lam]) * int(a[lam])
        out[j] = s % p if p is not None else s
    return out.astype(np.int64)


def brute_maxpool(a, s):
    c, h, w = a.shape
    ho, wo = -(-h // s), -(-w // s)
    out = np.zeros((c, ho, wo), dtype=a.dtype)
    for ic in range(c):
        for r in range(ho):
            for q in range(wo):
                out[ic, r, q] = a[ic, r * s : (r + 1) * s, q * s : (q + 1) * s].max()
    return out


@pytest.fixture(scope="session")
def oracles():
    class O:
        conv = staticmethod(brute_conv)
        dot = staticmethod(brute_dot)
        maxpool = staticmethod(brute_maxpool)

    return O
