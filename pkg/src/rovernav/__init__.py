"""Dead-reckoning navigation for wheeled rovers.

INS mechanization aided by wheel odometry, non-holonomic constraints and
zero-type updates at stops, with slip detection and RTS smoothing between
stops.
"""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
