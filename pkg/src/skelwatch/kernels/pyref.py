"""Pure-numpy patch kernels: the fallback backend for conv2d / conv_transpose2d.

Both functions are bit-compatible with the compiled versions in `_convkern`:
the scatter-add in `col2im` accumulates contributions to any given cell in
ascending (ki, kj) order, and the compiled loops replicate that order, so the
two backends produce bitwise-identical float64 results.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Gather conv patches of an already-padded (N, C, Hp, Wp) array.

    Returns a (N*oh*ow, C*kh*kw) matrix where row (n, i, j) holds the
    patch under the kernel at output position (i, j).
    """
    n, c, hp, wp = x.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    sn, sc, sh, sw = x.strides
    windows = as_strided(
        x,
        shape=(n, oh, ow, c, kh, kw),
        strides=(sn, sh * stride, sw * stride, sc, sh, sw),
    )
    return windows.reshape(n * oh * ow, c * kh * kw)


def col2im(
    cols: np.ndarray, n: int, c: int, hp: int, wp: int, kh: int, kw: int, stride: int
) -> np.ndarray:
    """Scatter-add the adjoint of `im2col` back onto a padded (N, C, Hp, Wp) array."""
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    blocks = cols.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    out = np.zeros((n, c, hp, wp), dtype=np.float64)
    for ki in range(kh):
        for kj in range(kw):
            out[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += blocks[
                :, :, :, :, ki, kj
            ]
    return out
