"""Haar-averaged fidelity of the qudit rewinding protocol.

Four independent routes to the same number:

* closed-form expressions (:mod:`rewindlab.closedform`),
* weighted single-domain-wall path sums and exhaustive spin sums over the
  mapped lattice model (:mod:`rewindlab.statmech`),
* 2x2 transfer-matrix products for convolutional circuits, with or
  without noise (:mod:`rewindlab.statmech`),
* direct quantum contraction / Monte-Carlo sampling (:mod:`rewindlab.oracle`).

Each route cross-checks the others; the exact second-moment twirl oracle is
the arbiter wherever it fits in memory.
"""

from rewindlab.circuits import CircuitShape, GateLayout, RecycleTarget, build_circuit, apply_rewinding
from rewindlab.result import FidelityResult

__all__ = [
    "CircuitShape",
    "GateLayout",
    "RecycleTarget",
    "build_circuit",
    "apply_rewinding",
    "FidelityResult",
]

__version__ = "0.1.0"
