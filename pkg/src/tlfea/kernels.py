"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``TLFEA_PURE_PYTHON=1`` before import to force the fallback.
"""
from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("TLFEA_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as impl
else:
    try:
        from . import _ckernels as impl
    except ImportError:  # pragma: no cover - depends on the build
        log.info("compiled kernels unavailable; using the numpy fallback")
        from . import _pykernels as impl

COMPILED = impl.IMPLEMENTATION == "compiled"

stress_batch = impl.stress_batch
internal_force = impl.internal_force
hessian_tangent = impl.hessian_tangent
chol_symbolic = impl.chol_symbolic
chol_numeric = impl.chol_numeric
chol_solve = impl.chol_solve
tri_tri_distance = impl.tri_tri_distance


def thread_count() -> int:
    """Worker count from ``TLFEA_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("TLFEA_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        log.warning("ignoring malformed TLFEA_THREADS=%r", raw)
        n = os.cpu_count() or 1
    return max(1, n)
