"""Select the first-passage kernel implementation at import time.

The compiled extension is used when it is importable; ``ONESIDED_BACKEND=python``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_choice = os.environ.get("ONESIDED_BACKEND", "").strip().lower()
if _choice == "python" or _compiled is None:
    kernels = _kernels_py
    BACKEND = "python"
else:
    kernels = _compiled
    BACKEND = "compiled"


def get(name: str | None = None):
    """Kernel module by name ('compiled' or 'python'); default is the import-time choice."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])
