"""Round kernels: compiled Cython core with a numpy fallback.

The compiled module is used when it imports; otherwise the numpy module is
used. Both expose the same functions, so callers can also request a backend
explicitly with :func:`get_backend`.
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KIND_SIMPLEX = _pykernels.KIND_SIMPLEX
KIND_L1 = _pykernels.KIND_L1
KIND_BOX = _pykernels.KIND_BOX

default = _ckernels if _ckernels is not None else _pykernels
BACKEND = default.BACKEND


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "cython")
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python") or the default."""
    if name is None:
        return default
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("the compiled kernel extension is not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
