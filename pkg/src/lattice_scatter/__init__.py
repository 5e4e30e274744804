"""Numerical toolkit for lattice scattering off finite cells and surface potentials.

Restricted Green functions of tight-binding operators, T-matrices, on-shell
scattering matrices, wave operators on the rescaled-energy grid, surface-state
densities, and the counting identities that tie bound and surface states to
the winding of the scattering phase.
"""

__version__ = "0.1.0"

from . import green, model, scatter, surface, waveop  # noqa: F401
