"""Slot layouts that make convolution a sum of slotwise products.

A convolution is first lowered to a dot product: im2col turns the input
into a matrix whose rows are receptive fields, and the kernel into a
matrix whose columns are flattened filters. Each output channel is then
a linear combination of the im2col matrix's columns, so if ciphertext
rows hold whole columns (xi of them per row), every output channel is
obtained with slotwise multiplies and adds only: the receiving party
sums xi in-clear segments after decryption, and no ciphertext rotation
ever happens.

Layouts:
  * column packing: xi = floor(n / (h'w')) im2col columns per row,
    d = ceil(c_i*f_h*f_w / xi) rows;
  * dense packing: plain row-major n elements per row, sigma =
    ceil(c_i*h_i*w_i / n) rows (used for values that only ride through
    slotwise arithmetic);
  * fc packing: xi = floor(n / n_i) copies of the input vector in one
    row, weight rows packed xi at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ConvGeometry:
    c_i: int
    h_i: int
    w_i: int
    c_o: int
    f_h: int
    f_w: int
    stride: int = 1
    pad: int = 0
    n: int = 4096

    def __post_init__(self):
        if self.h_out < 1 or self.w_out < 1:
            raise GeometryError(f"empty output for geometry {self}")
        if self.xi < 1:
            raise GeometryError(
                f"one output channel needs {self.out_hw} slots > n={self.n}; "
                "increase n or shrink the layer"
            )

    @property
    def h_out(self) -> int:
        return (self.h_i + 2 * self.pad - self.f_h) // self.stride + 1

    @property
    def w_out(self) -> int:
        return (self.w_i + 2 * self.pad - self.f_w) // self.stride + 1

    @property
    def out_hw(self) -> int:
        return self.h_out * self.w_out

    @property
    def cols(self) -> int:
        # receptive-field length = im2col column count
        return self.c_i * self.f_h * self.f_w

    @property
    def xi(self) -> int:
        return self.n // self.out_hw

    @property
    def d(self) -> int:
        return -(-self.cols // self.xi)

    @property
    def sigma(self) -> int:
        return -(-(self.c_i * self.h_i * self.w_i) // self.n)

    @property
    def in_size(self) -> int:
        return self.c_i * self.h_i * self.w_i

    @property
    def out_shape(self) -> tuple:
        return (self.c_o, self.h_out, self.w_out)


@dataclass(frozen=True)
class FcGeometry:
    n_i: int
    n_o: int
    n: int = 4096

    def __post_init__(self):
        if self.n_i > self.n:
            raise GeometryError(f"fc input {self.n_i} exceeds slot count {self.n}")

    @property
    def xi(self) -> int:
        return self.n // self.n_i

    @property
    def d_out(self) -> int:
        return -(-self.n_o // self.xi)

    @property
    def sigma(self) -> int:
        return -(-self.n_i // self.n)  # always 1 given n_i <= n


# ---------------------------------------------------------------------------
# im2col and its inverse reshape


def im2col(a: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """(c_i, h_i, w_i) -> (h'w', c_i*f_h*f_w); out-of-range inputs are zero."""
    a = np.asarray(a)
    if a.shape != (geom.c_i, geom.h_i, geom.w_i):
        raise GeometryError(f"input shape {a.shape} does not match geometry")
    ap = np.zeros((geom.c_i, geom.h_i + 2 * geom.pad, geom.w_i + 2 * geom.pad), dtype=a.dtype)
    ap[:, geom.pad : geom.pad + geom.h_i, geom.pad : geom.pad + geom.w_i] = a
    rows = np.empty((geom.out_hw, geom.cols), dtype=a.dtype)
    idx = 0
    for r in range(geom.h_out):
        for c in range(geom.w_out):
            r0, c0 = r * geom.stride, c * geom.stride
            rows[idx] = ap[:, r0 : r0 + geom.f_h, c0 : c0 + geom.f_w].reshape(-1)
            idx += 1
    return rows


def conv_output_from_matrix(y_mat: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """(h'w', c_o) dot-product result -> (c_o, h', w') tensor."""
    return y_mat.T.reshape(geom.c_o, geom.h_out, geom.w_out)


def kernel_matrix(k: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """(c_o, c_i, f_h, f_w) -> (c_i*f_h*f_w, c_o), matching im2col order."""
    k = np.asarray(k)
    if k.shape != (geom.c_o, geom.c_i, geom.f_h, geom.f_w):
        raise GeometryError(f"kernel shape {k.shape} does not match geometry")
    return k.reshape(geom.c_o, geom.cols).T


# ---------------------------------------------------------------------------
# column packing (conv input side)


def pack_columns(a_mat: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """(h'w', cols) -> (d, n): xi columns per row, each spanning h'w' slots."""
    hw, cols = a_mat.shape
    if hw != geom.out_hw:
        raise GeometryError(f"matrix has {hw} rows, geometry wants {geom.out_hw}")
    padded = np.zeros((hw, geom.d * geom.xi), dtype=np.int64)
    padded[:, :cols] = a_mat
    out = np.zeros((geom.d, geom.n), dtype=np.int64)
    for j in range(geom.d):
        block = padded[:, j * geom.xi : (j + 1) * geom.xi]  # (hw, xi)
        out[j, : geom.xi * hw] = block.T.reshape(-1)
    return out


def unpack_columns(packed: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """Inverse of pack_columns on the valid region."""
    hw = geom.out_hw
    out = np.zeros((hw, geom.d * geom.xi), dtype=np.int64)
    for j in range(geom.d):
        block = packed[j, : geom.xi * hw].reshape(geom.xi, hw)
        out[:, j * geom.xi : (j + 1) * geom.xi] = block.T
    return out[:, : geom.cols]


def encode_kernel(
    k_ring: np.ndarray,
    geom: ConvGeometry,
    p: int,
    channel_scale: np.ndarray | None = None,
    global_scale: int | None = None,
) -> np.ndarray:
    """Kernel -> (d, c_o, n) replicated rows aligned with pack_columns.

    Row (j, beta) holds each of the xi kernel entries K~[j*xi + chi, beta]
    repeated h'w' times, zero tail. Optional fixed-point multipliers
    (per-output-channel scale, global scale) are applied to the kernel
    entries before replication.
    """
    kt = kernel_matrix(k_ring, geom) % p  # (cols, c_o)
    if channel_scale is not None:
        kt = kt * (np.asarray(channel_scale, dtype=np.int64) % p)[None, :] % p
    if global_scale is not None:
        kt = kt * (int(global_scale) % p) % p
    full = np.zeros((geom.d * geom.xi, geom.c_o), dtype=np.int64)
    full[: geom.cols] = kt
    hw = geom.out_hw
    out = np.zeros((geom.d, geom.c_o, geom.n), dtype=np.int64)
    for j in range(geom.d):
        block = full[j * geom.xi : (j + 1) * geom.xi]  # (xi, c_o)
        out[j, :, : geom.xi * hw] = np.repeat(block.T, hw, axis=1)
    return out


def decode_conv_shares(c_rows: np.ndarray, geom: ConvGeometry, p: int) -> np.ndarray:
    """(c_o, n) slot rows -> (c_o, h', w'): sum the xi segments, reshape."""
    c_rows = np.asarray(c_rows, dtype=np.int64)
    if c_rows.shape != (geom.c_o, geom.n):
        raise GeometryError(f"expected ({geom.c_o}, {geom.n}) rows, got {c_rows.shape}")
    hw = geom.out_hw
    segs = c_rows[:, : geom.xi * hw].reshape(geom.c_o, geom.xi, hw)
    y_cols = segs.sum(axis=1) % p  # (c_o, hw)
    return conv_output_from_matrix(y_cols.T, geom)


# ---------------------------------------------------------------------------
# dense packing (values that ride through slotwise arithmetic)


def pack_dense(t: np.ndarray, n: int) -> np.ndarray:
    """Flatten row-major, n elements per row, zero-padded tail."""
    flat = np.asarray(t, dtype=np.int64).reshape(-1)
    rows = -(-flat.size // n)
    out = np.zeros((rows, n), dtype=np.int64)
    out.reshape(-1)[: flat.size] = flat
    return out


def unpack_dense(rows: np.ndarray, shape: tuple) -> np.ndarray:
    size = int(np.prod(shape))
    return np.asarray(rows, dtype=np.int64).reshape(-1)[:size].reshape(shape)


# ---------------------------------------------------------------------------
# fully-connected packing


def pack_fc_input(a_vec: np.ndarray, geom: FcGeometry) -> np.ndarray:
    """n_i-vector -> one n-slot row holding xi copies, zero tail."""
    a_vec = np.asarray(a_vec, dtype=np.int64).reshape(-1)
    if a_vec.size != geom.n_i:
        raise GeometryError(f"fc input size {a_vec.size} != {geom.n_i}")
    out = np.zeros(geom.n, dtype=np.int64)
    out[: geom.xi * geom.n_i] = np.tile(a_vec, geom.xi)
    return out


def encode_fc_weights(w: np.ndarray, geom: FcGeometry, p: int) -> np.ndarray:
    """(n_o, n_i) -> (d_out, n): xi weight rows per slot row, zero padding."""
    w = np.asarray(w, dtype=np.int64) % p
    if w.shape != (geom.n_o, geom.n_i):
        raise GeometryError(f"weight shape {w.shape} != ({geom.n_o}, {geom.n_i})")
    full = np.zeros((geom.d_out * geom.xi, geom.n_i), dtype=np.int64)
    full[: geom.n_o] = w
    out = np.zeros((geom.d_out, geom.n), dtype=np.int64)
    for j in range(geom.d_out):
        out[j, : geom.xi * geom.n_i] = full[j * geom.xi : (j + 1) * geom.xi].reshape(-1)
    return out


def decode_fc_output(c_rows: np.ndarray, geom: FcGeometry, p: int) -> np.ndarray:
    """(d_out, n) slot rows -> (n_o,): per output, sum its n_i-slot run."""
    c_rows = np.asarray(c_rows, dtype=np.int64)
    if c_rows.shape != (geom.d_out, geom.n):
        raise GeometryError(f"expected ({geom.d_out}, {geom.n}) rows, got {c_rows.shape}")
    runs = c_rows[:, : geom.xi * geom.n_i].reshape(geom.d_out, geom.xi, geom.n_i)
    sums = runs.sum(axis=2) % p  # (d_out, xi)
    return sums.reshape(-1)[: geom.n_o]


# ---------------------------------------------------------------------------
# pooling helpers


def window_sum(a: np.ndarray, s: int, p: int | None = None) -> np.ndarray:
    """Sum s x s windows (ceiling tiling) per channel."""
    a = np.asarray(a)
    c, h, w = a.shape
    ho, wo = -(-h // s), -(-w // s)
    out = np.zeros((c, ho, wo), dtype=a.dtype)
    for r in range(ho):
        for q in range(wo):
            out[:, r, q] = a[:, r * s : (r + 1) * s, q * s : (q + 1) * s].sum(axis=(1, 2))
    return out % p if p is not None else out
