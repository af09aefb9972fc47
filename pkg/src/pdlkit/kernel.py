"""Select the tape interpreter: the compiled extension when it was built,
otherwise the pure-Python fallback.  PDLKIT_PURE=1 forces the fallback."""
import os

from . import _fallback

if os.environ.get("PDLKIT_PURE") == "1":
    _impl = _fallback
else:
    try:
        from . import _kernel as _impl
    except ImportError:  # extension not built
        _impl = _fallback

run_tape = _impl.run_tape
BACKEND = _impl.BACKEND
fallback_run_tape = _fallback.run_tape

__all__ = ["run_tape", "BACKEND", "fallback_run_tape"]
