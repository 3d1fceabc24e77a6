"""Step-loop backend selection.

Two interchangeable implementations of the hot inner loops exist:
compiled (numba) and pure numpy.  VRMEST_BACKEND picks one explicitly
("numba" or "numpy"); unset or "auto" prefers the compiled one and falls
back to numpy if numba is unavailable.  Results agree across backends up
to floating-point summation order; within one backend runs are exactly
reproducible.
"""

import os
import warnings

ENV_VAR = "VRMEST_BACKEND"

_active = None


def _load(choice):
    if choice == "numpy":
        from . import _loops_np
        return _loops_np
    if choice == "numba":
        from . import _loops_nb
        return _loops_nb
    if choice in ("", "auto"):
        try:
            from . import _loops_nb
            return _loops_nb
        except ImportError as exc:
            warnings.warn(f"compiled backend unavailable ({exc}); using numpy loops")
            from . import _loops_np
            return _loops_np
    raise ValueError(f"{ENV_VAR} must be 'numba', 'numpy' or 'auto', got {choice!r}")


def loops():
    """The active loop module, resolved lazily from the environment."""
    global _active
    if _active is None:
        _active = _load(os.environ.get(ENV_VAR, "auto").strip().lower())
        if hasattr(_active, "warmup"):
            _active.warmup()
    return _active


def use(choice):
    """Force a backend programmatically (tests and benchmarks)."""
    global _active
    _active = _load(choice)
    if hasattr(_active, "warmup"):
        _active.warmup()
    return _active


def name():
    return loops().NAME
