"""Backend selection for the hot loops.

The compiled extension is used when it was built and ``QRCSL_PURE_PYTHON``
is unset; otherwise the NumPy implementation takes over. ``BACKEND`` names
the active choice.
"""
import os

if os.environ.get("QRCSL_PURE_PYTHON"):
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        from . import _core_py as _impl

BACKEND = "python" if _impl.__name__.endswith("_core_py") else "cython"

smear_integrand = _impl.smear_integrand
csl_trajectory_chunk = _impl.csl_trajectory_chunk


def backend_module(name):
    """Return the implementation module for ``"python"`` or ``"cython"``."""
    if name == "python":
        from . import _core_py
        return _core_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
