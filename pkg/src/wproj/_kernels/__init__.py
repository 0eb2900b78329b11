"""Numerical kernels with import-time backend selection.

The compiled Cython extension is preferred; the pure-Python module is a
drop-in fallback.  Set WPROJ_FORCE_PYTHON=1 to force the fallback (used by
the benchmark and the backend-equivalence tests).
"""

import os

if os.environ.get("WPROJ_FORCE_PYTHON"):
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND
solve_transportation = _impl.solve_transportation
isotonic_fit = _impl.isotonic_fit
descent_oracle = _impl.descent_oracle


def load_backend(name):
    """Return the raw backend module ('compiled' or 'python'), if importable."""
    if name == "python":
        from . import _core_py

        return _core_py
    if name == "compiled":
        from . import _core  # type: ignore[attr-defined]

        return _core
    raise ValueError(f"unknown backend {name!r}")
