"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba backend is used when numba imports cleanly, unless the environment
variable ``ZIB_DISABLE_NUMBA`` is set to a truthy value. Both backends expose:

``log_gamma(x)``, ``log_beta_cdf(x, a, b)``, ``log_beta_cdf_diff(lo, hi, a, b)``
(scalars), ``log_beta_cdf_arr``, ``log_beta_cdf_diff_arr`` (arrays), and the
covariate-model likelihood ``zib_loglik`` / ``zib_loglik_grad``.
"""

import os

from . import _numpy as numpy_backend

_FLAG = os.environ.get("ZIB_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

numba_backend = None
if not _DISABLED:
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba missing
        numba_backend = None

backend = numba_backend if numba_backend is not None else numpy_backend
BACKEND = "numba" if backend is numba_backend else "numpy"

log_gamma = backend.log_gamma
log_beta_cdf = backend.log_beta_cdf
log_beta_cdf_diff = backend.log_beta_cdf_diff
log_beta_cdf_arr = backend.log_beta_cdf_arr
log_beta_cdf_diff_arr = backend.log_beta_cdf_diff_arr
zib_loglik = backend.zib_loglik
zib_loglik_grad = backend.zib_loglik_grad

__all__ = [
    "BACKEND", "backend", "numpy_backend", "numba_backend",
    "log_gamma", "log_beta_cdf", "log_beta_cdf_diff", "log_beta_cdf_arr",
    "log_beta_cdf_diff_arr", "zib_loglik", "zib_loglik_grad",
]
