"""Numerical laboratory for blow-up of perturbed semilinear wave equations.

The modules follow a run from the radial equation (`model`, `radial_solver`) through
similarity variables (`similarity`, `functionals`) to its soliton structure
(`solitons`, `soliton_ode`), the geometry of the blow-up set (`geometry`) and the
local energy of the dilated solution (`local_energy`). The `harness` module runs the
canned experiments and writes their artifacts.
"""

import importlib.metadata
import logging
import sys

from .utils import block_terminal_output

try:
    __version__ = importlib.metadata.version("blowup")
except importlib.metadata.PackageNotFoundError:
    # Running from a source checkout that was never installed
    __version__ = "0.0.0+unknown"


# Numerical warnings near blow-up are expected, but tests turn warnings into errors
if not hasattr(sys, "_called_from_test"):
    block_terminal_output()


logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s ⋅ %(name)s ⋅ %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
