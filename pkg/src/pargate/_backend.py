"""Kernel backend selection.

The compiled module is used when importable; ``PARGATE_BACKEND=python``
forces the numpy fallback.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

try:
    from . import _ckernels as compiled_backend  # type: ignore[no-redef]
except ImportError:
    compiled_backend = None

if compiled_backend is not None and os.environ.get("PARGATE_BACKEND", "").lower() != "python":
    kernels = compiled_backend
    BACKEND = "cython"
else:
    kernels = python_backend
    BACKEND = "python"
