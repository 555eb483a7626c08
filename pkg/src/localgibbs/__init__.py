"""Desk-scale simulator for dissipative Gibbs-state preparation with local circuits.

The package builds detailed-balance Lindbladians from spatially truncated
Hamiltonian patches, evolves them by deterministic or randomized Trotter
products, dilates every local channel into a single-ancilla gate gadget,
compiles the gadget unitaries onto a CZ-ladder circuit template, and measures
all the approximation errors involved (truncation, Trotter, gadget,
compilation, hardware noise).

Everything is exact dense linear algebra on top of numpy/scipy; the intended
system sizes are n <= 12 qubits.
"""

from .errors import ConfigError, ConvergenceError, ResourceCapError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ConvergenceError", "ResourceCapError", "__version__"]
