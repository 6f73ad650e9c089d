# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled patch kernels for conv2d / conv_transpose2d.

Bit-compatible with skelwatch.kernels.pyref: col2im accumulates into any
given output cell in ascending (ki, kj) order, matching the fallback's loop.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def im2col(cnp.float64_t[:, :, :, ::1] x, int kh, int kw, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], hp = x.shape[2], wp = x.shape[3]
    cdef Py_ssize_t oh = (hp - kh) // stride + 1
    cdef Py_ssize_t ow = (wp - kw) // stride + 1
    out_arr = np.empty((n * oh * ow, c * kh * kw), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] cols = out_arr
    cdef Py_ssize_t ni, i, j, ci, ki, kj, row, col
    for ni in range(n):
        for i in range(oh):
            for j in range(ow):
                row = (ni * oh + i) * ow + j
                for ci in range(c):
                    for ki in range(kh):
                        col = (ci * kh + ki) * kw
                        for kj in range(kw):
                            cols[row, col + kj] = x[ni, ci, i * stride + ki, j * stride + kj]
    return out_arr


def col2im(cnp.float64_t[:, ::1] cols, int n, int c, int hp, int wp, int kh, int kw,
           int stride):
    cdef Py_ssize_t oh = (hp - kh) // stride + 1
    cdef Py_ssize_t ow = (wp - kw) // stride + 1
    out_arr = np.zeros((n, c, hp, wp), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t ki, kj, ni, ci, i, j, row
    # (ki, kj) outermost so overlapping cells accumulate in the same order as
    # the numpy fallback's strided slice adds.
    for ki in range(kh):
        for kj in range(kw):
            for ni in range(n):
                for ci in range(c):
                    for i in range(oh):
                        row = (ni * oh + i) * ow
                        for j in range(ow):
                            out[ni, ci, ki + i * stride, kj + j * stride] += \
                                cols[row + j, (ci * kh + ki) * kw + kj]
    return out_arr
