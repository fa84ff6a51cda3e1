"""Hot-kernel backend selection.

The compiled Cython core is preferred when it built successfully; the
NumPy reference in _ref is the fallback and the semantic ground truth.
Set CONTESTEQ_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the backend-equivalence tests).
"""

import os

from . import _ref

try:
    from . import _core
except ImportError:
    _core = None

_use_compiled = _core is not None and not os.environ.get("CONTESTEQ_PURE_PYTHON")
_impl = _core if _use_compiled else _ref

win_prob_batch = _impl.win_prob_batch


def backend_name() -> str:
    return "compiled" if _use_compiled else "python"


def has_compiled() -> bool:
    return _core is not None
