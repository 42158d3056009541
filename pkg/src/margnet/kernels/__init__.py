# kernels/__init__.py
"""Hot numeric kernels with selectable backend.

The jitted numba implementations are used by default. Setting the
environment variable ``MARGNET_NO_NUMBA=1`` (or any non-empty value other
than ``0``) before import selects the pure-numpy fallback; the fallback is
also selected automatically when numba is not importable. Both backends are
bit-identical; ``benchmarks/kernel_bench.py`` compares their speed.
"""
from __future__ import annotations

import os
import warnings

from . import _numpy

_flag = os.environ.get("MARGNET_NO_NUMBA", "").strip()
if _flag and _flag != "0":
    USING_NUMBA = False
else:
    try:
        from . import _numba  # noqa: F401
        USING_NUMBA = True
    except ImportError:
        warnings.warn("numba unavailable; falling back to pure-numpy kernels")
        USING_NUMBA = False

_impl = _numba if USING_NUMBA else _numpy

ancestral_batch = _impl.ancestral_batch
likelihood_weighting_batch = _impl.likelihood_weighting_batch
joint_logp_batch = _impl.joint_logp_batch
mask_encode_batch = _impl.mask_encode_batch
node_patterns = _numpy.node_patterns

__all__ = [
    "USING_NUMBA",
    "ancestral_batch",
    "likelihood_weighting_batch",
    "joint_logp_batch",
    "mask_encode_batch",
    "node_patterns",
]
