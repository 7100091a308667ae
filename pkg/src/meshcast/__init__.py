"""meshcast: graph-based deterministic and ensemble weather modeling on toy data.

The package builds multi-scale and hierarchical mesh graphs (icosahedral on
the sphere, quadrilateral on planar limited areas), runs message-passing
forecast models over them, trains with weighted-MSE / NLL / variational /
CRPS objectives, and verifies forecasts with standard ensemble metrics.
Everything computes on a small float64 autodiff core; no ML framework is
required.
"""

from . import errors, layers, metrics, meshgraph, models, numcore, objectives, pipeline

__version__ = "0.1.0"

__all__ = [
    "errors",
    "layers",
    "metrics",
    "meshgraph",
    "models",
    "numcore",
    "objectives",
    "pipeline",
    "__version__",
]
