"""Kernel backend selection.

The hot numeric kernels (mixture-score evaluation, median filter) ship in two
equivalent implementations: numba-jitted and pure numpy. The environment
variable ``SDEDIT_BACKEND`` picks one:

* unset or ``auto`` — numba if importable, else numpy;
* ``numba`` — require numba, fail loudly if missing;
* ``numpy`` — force the pure-numpy path.

``bench/bench_backends.py`` compares the two.
"""

import os

BACKEND_ENV = "SDEDIT_BACKEND"


def _select():
    requested = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{BACKEND_ENV} must be 'auto', 'numba' or 'numpy', got {requested!r}"
        )
    if requested in ("auto", "numba"):
        try:
            from . import _kernels_numba as impl

            return "numba", impl
        except ImportError:
            if requested == "numba":
                raise
    from . import _kernels_numpy as impl

    return "numpy", impl


BACKEND_NAME, _impl = _select()

gmm_score = _impl.gmm_score
median_filter_2d = _impl.median_filter_2d


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND_NAME
