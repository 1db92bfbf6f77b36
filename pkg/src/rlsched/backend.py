"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly, the
network has the standard two-hidden-layer trunk, and the problem is small
enough that per-call overhead (not raw FLOPs) dominates; large image inputs
go to NumPy, whose BLAS wins on big matrices.  Set RLSCHED_PURE=1 to force
the pure backend.
"""

from __future__ import annotations

import os

try:
    from . import _kernels
    HAVE_COMPILED = True
except ImportError:  # extension not built; pure NumPy fallback
    _kernels = None
    HAVE_COMPILED = False

FORCE_PURE = os.environ.get("RLSCHED_PURE", "").lower() in ("1", "true", "yes")
COMPILED_ENABLED = HAVE_COMPILED and not FORCE_PURE

# Above this input width the first-layer matmul is BLAS territory.
COMPILED_MAX_INPUT = 2048


def active_backend() -> str:
    return "compiled" if COMPILED_ENABLED else "pure"


def use_compiled(n_hidden_layers: int, input_dim: int) -> bool:
    return COMPILED_ENABLED and n_hidden_layers == 2 and input_dim <= COMPILED_MAX_INPUT
