"""Backend selection for the hot loops.

The compiled extension (``_kernels``) is used when it was built; otherwise the
numpy fallback is used. ``set_backend`` overrides the choice at runtime.
"""
from __future__ import annotations

from types import ModuleType

from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

HAVE_EXTENSION = _kernels is not None
OPTIMAL, UNBOUNDED, ITERATION_LIMIT = _fallback.OPTIMAL, _fallback.UNBOUNDED, _fallback.ITERATION_LIMIT

_active: ModuleType = _kernels if HAVE_EXTENSION else _fallback


def set_backend(name: str) -> None:
    """Select ``"cython"`` or ``"python"``."""
    global _active
    if name == "python":
        _active = _fallback
    elif name == "cython":
        if not HAVE_EXTENSION:
            raise RuntimeError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        _active = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def get_backend() -> str:
    return "cython" if HAVE_EXTENSION and _active is _kernels else "python"


def impl() -> ModuleType:
    return _active
