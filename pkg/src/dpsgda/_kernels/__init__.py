"""Hot-loop kernels: compiled Cython extension with a pure-numpy fallback.

The backend is chosen at import time. Set ``DPSGDA_BACKEND=python`` to force
the fallback or ``DPSGDA_BACKEND=compiled`` to fail loudly when the
extension is missing.
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("DPSGDA_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _pykernels
        BACKEND = "python"

quadgame_block = _impl.quadgame_block
auc_pair_counts = _impl.auc_pair_counts


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('python' or 'compiled'), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
