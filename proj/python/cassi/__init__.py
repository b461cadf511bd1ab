"""Dispersive CASSI simulation: prism design, rendering, mapping and reconstruction."""

from ._cassi import *  # noqa: F401,F403
from ._cassi import __version__  # noqa: F401
