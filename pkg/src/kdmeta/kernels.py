"""Hot-kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``KDMETA_PURE_PYTHON=1`` before import to force the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KDMETA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

sgcs_columns = _impl.sgcs_columns
sgcs_grad = _impl.sgcs_grad
principal_eigh = _impl.principal_eigh
mgs = _impl.mgs

__all__ = ["BACKEND", "sgcs_columns", "sgcs_grad", "principal_eigh", "mgs"]
