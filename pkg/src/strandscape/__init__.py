"""strandscape: trajectory logs from elementary-step DNA reaction simulators
in, biophysically meaningful 2D landscapes and kinetics analyses out.

The pipeline: parse dp-notation trajectory logs, deduplicate states, build
the observed transition graph, turn structure graphs into geometric
scattering features, assemble passage-time and edit-distance neighborhoods,
embed (PHATE or direct stress minimization), then evaluate, cluster, and
export a viewer bundle. A dense CTMC toolbox (equilibrium, detailed balance,
propagator, mean first passage times, Gillespie sampling) serves as the
validation oracle throughout.
"""

__version__ = "0.1.0"

from . import bundle, ctmc, distances, dp, embedding, metrics, scattering, trajlog
from .errors import StrandscapeError

__all__ = [
    "bundle",
    "ctmc",
    "distances",
    "dp",
    "embedding",
    "metrics",
    "scattering",
    "trajlog",
    "StrandscapeError",
    "__version__",
]
