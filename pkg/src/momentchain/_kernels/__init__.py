"""Hot kernels for dense multi-register state vectors.

Two interchangeable backends implement the same low-level interface: a Cython
extension (``_ckernels``) and a pure-NumPy fallback (``_pykernels``). The
compiled core is picked automatically when present; set the environment
variable ``MOMENTCHAIN_KERNELS=python`` or ``=cython`` to force one, or call
:func:`set_backend` at runtime (used by the benchmark and the parity tests).

Index bookkeeping is shared: for a layout with register dimensions ``dims``
and a tuple of target axes, every flat state index splits into a "base" part
(non-target digits) plus an "offset" part (target digits, slowest-varying
first in the given target order). Kernels then gather/scatter contiguous
blocks without transposing the state.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on build environment
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_env = os.environ.get("MOMENTCHAIN_KERNELS", "auto").lower()
if _env == "auto":
    _impl = _ckernels if _ckernels is not None else _pykernels
elif _env in _BACKENDS:
    _impl = _BACKENDS[_env]
else:
    raise ImportError(f"unknown MOMENTCHAIN_KERNELS backend {_env!r}")


def backend() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return _impl.NAME


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> None:
    """Force a kernel backend at runtime; raises if it is not built."""
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _impl = _BACKENDS[name]


# Cache bound: index tables cost ~16 bytes per amplitude, so skip the cache
# for states past this size (recomputing is then negligible anyway).
_CACHE_DIM_LIMIT = 1 << 16


def _compute_indices(dims: tuple[int, ...], targets: tuple[int, ...]):
    n = len(dims)
    total = math.prod(dims)
    idx = np.arange(total, dtype=np.int64).reshape(dims)
    base = np.ascontiguousarray(
        idx[tuple(0 if i in targets else slice(None) for i in range(n))]
    ).reshape(-1)
    off_grid = idx[tuple(slice(None) if i in targets else 0 for i in range(n))]
    order = sorted(targets)
    off_grid = off_grid.transpose([order.index(t) for t in targets])
    offsets = np.ascontiguousarray(off_grid).reshape(-1)
    idx2d = base[:, None] + offsets[None, :]
    return base, offsets, idx2d


@lru_cache(maxsize=256)
def _cached_indices(dims, targets):
    return _compute_indices(dims, targets)


def _indices(dims: tuple[int, ...], targets: tuple[int, ...]):
    if math.prod(dims) <= _CACHE_DIM_LIMIT:
        return _cached_indices(dims, targets)
    return _compute_indices(dims, targets)


def apply_matrix(
    amps: np.ndarray,
    matrix: np.ndarray,
    dims: tuple[int, ...],
    targets: tuple[int, ...],
) -> np.ndarray:
    """Apply a square matrix to the given target registers of a state vector.

    ``matrix`` is indexed row-major over the target registers in the order
    given (first target slowest-varying). Returns a new array.
    """
    base, offsets, idx2d = _indices(tuple(dims), tuple(targets))
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
    out = np.empty_like(amps)
    _impl.apply_matrix_kernel(amps, matrix, base, offsets, idx2d, out)
    return out


def marginal_probabilities(
    amps: np.ndarray, dims: tuple[int, ...], targets: tuple[int, ...]
) -> np.ndarray:
    """|amplitude|^2 totals grouped by the targets' joint computational index."""
    base, offsets, idx2d = _indices(tuple(dims), tuple(targets))
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    out = np.empty(offsets.shape[0], dtype=np.float64)
    _impl.marginal_kernel(amps, base, offsets, idx2d, out)
    return out
