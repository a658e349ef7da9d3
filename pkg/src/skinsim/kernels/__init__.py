"""Ray-cast kernel backends.

The compiled extension (skinsim.kernels._native) is used when it was built;
otherwise the pure-numpy implementation takes over.  Set SKINSIM_KERNELS to
"python" or "native" to force a backend; "native" raises if the extension is
missing.
"""

import importlib
import os

from . import numpy_backend

_FORCED = os.environ.get("SKINSIM_KERNELS", "").strip().lower()

_native = None
if _FORCED != "python":
    try:
        _native = importlib.import_module("skinsim.kernels._native")
    except ImportError:
        if _FORCED == "native":
            raise ImportError(
                "SKINSIM_KERNELS=native but the compiled extension is not "
                "built; install the package (pip install -e .) first"
            ) from None

BACKEND_NAME = "native" if _native is not None else "python"


def available_backends() -> list[str]:
    names = ["python"]
    if _native is not None:
        names.append("native")
    return names


def get_backend(name: str | None = None):
    """Return the kernel module for a backend name (None/'auto' = default)."""
    if name in (None, "auto"):
        return _native if _native is not None else numpy_backend
    if name == "python":
        return numpy_backend
    if name == "native":
        if _native is None:
            raise ValueError("native kernel backend is not built")
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")
