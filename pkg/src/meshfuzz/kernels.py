"""Kernel backend selection.

Prefers the compiled extension; falls back to the numpy implementation when
the extension was not built. Set MESHFUZZ_PURE_PY=1 to force the fallback
(used by the benchmark and by tests that compare both backends).
"""

import os

if os.environ.get("MESHFUZZ_PURE_PY"):
    from meshfuzz import _covkern_py as _impl
else:
    try:
        from meshfuzz import _covkern as _impl  # type: ignore[attr-defined]
    except ImportError:
        from meshfuzz import _covkern_py as _impl

BACKEND = _impl.BACKEND
classify_inplace = _impl.classify_inplace
update_virgin = _impl.update_virgin
count_covered = _impl.count_covered
