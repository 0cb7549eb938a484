"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-numpy implementation takes over transparently.  Set the environment
variable ``SYRAN_BACKEND`` to ``compiled`` or ``python`` to force a choice
(``compiled`` raises if the extension is missing).
"""

from __future__ import annotations

import os

_requested = os.environ.get("SYRAN_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _kernel_py as _impl
elif _requested == "compiled":
    from . import _kernel as _impl
elif _requested == "":
    try:
        from . import _kernel as _impl
    except ImportError:
        from . import _kernel_py as _impl
else:
    raise ImportError(
        f"SYRAN_BACKEND={_requested!r} not recognized (use 'compiled' or 'python')"
    )

BACKEND = _impl.BACKEND_NAME
eval_program = _impl.eval_program
deviation_stats = _impl.deviation_stats


def active_backend():
    """Name of the kernel backend selected at import time."""
    return BACKEND
