"""Sticky-reflected Langevin dynamics for a lattice interface above a wall.

Heights live in the orthant ``[0, inf)^n``; each site carries an atom of
weight ``s`` at 0 (pinning) next to the Lebesgue part, and the gradient
energy couples neighbours.  The package provides the stratified measure,
deterministic quadrature of its face masses, the associated Dirichlet form,
a sticky birth-death chain approximating the dynamics with an exact
stationary oracle, a Gibbs sampler and the estimators tying them together.
"""
__version__ = "0.1.0"

from .errors import StickyError  # noqa: E402
from .gibbs import GibbsModel, PotentialSpec, build_lattice  # noqa: E402
from .strata import StratumId, enumerate_strata, stratum_of  # noqa: E402

__all__ = ["GibbsModel", "PotentialSpec", "StickyError", "StratumId", "__version__",
           "build_lattice", "enumerate_strata", "stratum_of"]
