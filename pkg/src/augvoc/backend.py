"""Compute-backend selection for the hot convolution kernels.

Two implementations of the conv kernels exist: numba ``@njit`` loops and a
pure-numpy (im2col + BLAS) fallback. The active one is chosen once at import
time from the ``AUGVOC_BACKEND`` environment variable:

    AUGVOC_BACKEND=numba   require numba (error if unavailable)
    AUGVOC_BACKEND=numpy   force the pure-numpy path
    unset / "auto"         use numba when importable, else fall back

Everything outside the conv kernels (FFTs, filterbank matmuls, optimizer
updates) is vectorized numpy on both backends.
"""

import os
import warnings

_CHOICE = os.environ.get("AUGVOC_BACKEND", "auto").strip().lower() or "auto"
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"AUGVOC_BACKEND must be 'numba', 'numpy' or 'auto', got {_CHOICE!r}"
    )

if _CHOICE == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False
        if _CHOICE == "numba":
            raise
        warnings.warn(
            "numba is not installed; falling back to the pure-numpy kernels "
            "(set AUGVOC_BACKEND=numpy to silence this warning)"
        )

USE_NUMBA = HAVE_NUMBA and _CHOICE != "numpy"


def active_backend():
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    return "numba" if USE_NUMBA else "numpy"
