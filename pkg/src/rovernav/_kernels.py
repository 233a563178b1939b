"""Backend selection for the per-sample kernels.

The compiled extension is used when importable; ``ROVERNAV_BACKEND=python``
forces the numpy fallback.
"""

import os

from . import _pykernels

if os.environ.get("ROVERNAV_BACKEND", "").lower() == "python":
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:  # extension not built
        backend = _pykernels

mechanize_step = backend.mechanize_step
system_matrix = backend.system_matrix
propagate = backend.propagate
time_update = backend.time_update
window_add = backend.window_add
kalman_update = backend.kalman_update
rts_backward = backend.rts_backward
WINDOW_SIZE = _pykernels.WINDOW_SIZE
BACKEND = backend.NAME
