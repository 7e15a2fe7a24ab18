"""Batch kernels used by the Monte Carlo harness.

The compiled Cython extension is used when it was built; otherwise the
numpy implementation is used. Setting ``NEGDEP_PURE_PYTHON=1`` forces the
numpy path. Both backends agree bit for bit.
"""
import os

from . import _pykernels

if os.environ.get("NEGDEP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.NAME

simes_rows = _impl.simes_rows
bh_rows = _impl.bh_rows
esym_rows = _impl.esym_rows


def backends():
    """Every importable backend module, keyed by name."""
    found = {_pykernels.NAME: _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found[_ckernels.NAME] = _ckernels
    return found
