"""Kernel backend selection.

NODEFLOW_BACKEND picks the implementation at import time:

  auto   use numba when importable, else numpy (default)
  numba  require the jitted kernels, fail if numba is missing
  numpy  force the pure-numpy fallback

Both backends expose eval_batch / rk4_batch / h_series_batch over the
PackedField encoding and agree to floating-point rounding.
"""

import os

from .pack import PackedField, negated, pack_field

_choice = os.environ.get("NODEFLOW_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"NODEFLOW_BACKEND={_choice!r}: expected auto, numba, or numpy")

if _choice == "numpy":
    from . import numpy_impl as _impl
elif _choice == "numba":
    from . import numba_impl as _impl
else:
    try:
        from . import numba_impl as _impl
    except ImportError:
        from . import numpy_impl as _impl

eval_batch = _impl.eval_batch
rk4_batch = _impl.rk4_batch
h_series_batch = _impl.h_series_batch


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _impl.NAME


__all__ = ["PackedField", "pack_field", "negated", "eval_batch",
           "rk4_batch", "h_series_batch", "backend_name"]
