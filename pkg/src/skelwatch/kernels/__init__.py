"""Backend selection for the conv patch kernels.

Prefers the compiled Cython extension; falls back to the pure-numpy versions
when the extension is unavailable or SKELWATCH_NO_EXT is set. Both backends
are bitwise-equivalent, so the choice only affects speed.
"""

import os

from skelwatch.kernels import pyref

if os.environ.get("SKELWATCH_NO_EXT"):
    _impl = pyref
    COMPILED = False
else:
    try:
        from skelwatch.kernels import _convkern as _impl

        COMPILED = True
    except ImportError:
        _impl = pyref
        COMPILED = False

im2col = _impl.im2col
col2im = _impl.col2im

__all__ = ["im2col", "col2im", "COMPILED", "pyref"]
