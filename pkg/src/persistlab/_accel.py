"""Select the compiled core or the numpy fallback.

``PERSISTLAB_PURE=1`` forces the fallback even when the extension is built.
"""
import os

from . import _fallback

BACKEND = "python"
core = _fallback

if not os.environ.get("PERSISTLAB_PURE"):
    try:
        from . import _core as core  # noqa: F811
        BACKEND = "compiled"
    except ImportError:  # extension not built
        core = _fallback


def use(backend):
    """Switch backends at runtime ("compiled" or "python"); returns the old one."""
    global core, BACKEND
    old = BACKEND
    if backend == "python":
        core, BACKEND = _fallback, "python"
    elif backend == "compiled":
        from . import _core
        core, BACKEND = _core, "compiled"
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return old
