"""Self-similar profiles of the coagulation equation with degree-zero kernels."""

from ._smolu import *  # noqa: F401,F403
from ._smolu import __version__  # noqa: F401
