"""Backend selector for the numerical kernels.

The compiled extension is preferred when it imports cleanly; otherwise the
NumPy fallback takes over. Set ``OMICSMR_PURE_PYTHON=1`` to force the
fallback (useful for debugging and for the backend-parity tests). Both
backends implement the same contracts and agree on seeded runs.
"""

from __future__ import annotations

import os

_FORCE_PY = os.environ.get("OMICSMR_PURE_PYTHON", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

if _FORCE_PY:
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

clump_greedy = _impl.clump_greedy
weighted_median_sorted = _impl.weighted_median_sorted
wm_bootstrap = _impl.wm_bootstrap
neighbor_states = _impl.neighbor_states
sss_chain = _impl.sss_chain


def available_backends() -> dict[str, object]:
    """Map backend name to its module, for benchmarks and parity tests."""
    from . import _pykernels

    found: dict[str, object] = {"python": _pykernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        found["compiled"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = [
    "BACKEND",
    "available_backends",
    "clump_greedy",
    "weighted_median_sorted",
    "wm_bootstrap",
    "neighbor_states",
    "sss_chain",
]
