"""Heterogeneous retrieval engine bindings."""

from medrag._core import *  # noqa: F401,F403
from medrag._core import __version__  # noqa: F401
