"""wproj: metric projections onto density-capped measures in Wasserstein space.

Exact discrete optimal transport, the one-dimensional quantile projection,
a capacitated-flow projection onto grids, executable checks for the proved
inequalities, and the small-p counterexample experiments.
"""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
