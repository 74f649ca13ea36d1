"""Monte-Carlo inner loops.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. Set ``OFFSWITCH_PURE_PYTHON=1`` to force the fallback. Both
consume the same splitmix64 stream, so results are identical for a seed.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("OFFSWITCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

glitch_trials = _impl.glitch_trials
forgery_attempts = _impl.forgery_attempts
edit_trials = _impl.edit_trials
collision_trials = _impl.collision_trials

__all__ = ["BACKEND", "glitch_trials", "forgery_attempts", "edit_trials", "collision_trials"]
