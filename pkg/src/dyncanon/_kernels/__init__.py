"""Hot kernels with a compiled implementation and a numpy fallback.

The compiled extension is used when it was built and importable, unless
the environment variable ``DYNCANON_PURE_PYTHON`` is set to a non-empty
value other than ``0``.  ``BACKEND`` names the active implementation.
"""
import os

from . import _rk4_py

_force_py = os.environ.get("DYNCANON_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend forced")
    from ._rk4 import rk4_trajectory  # type: ignore[import-not-found]

    BACKEND = "cython"
except ImportError:
    rk4_trajectory = _rk4_py.rk4_trajectory
    BACKEND = "python"

rk4_trajectory_py = _rk4_py.rk4_trajectory

__all__ = ["rk4_trajectory", "rk4_trajectory_py", "BACKEND"]
