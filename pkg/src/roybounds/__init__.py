"""Sharp partial-identification bounds for Roy selection models.

Submodules:
  probability  - cell records, interval bounds, simplex polytopes
  binary       - closed-form binary-model bounds
  generalized  - generalized binary model with an instrument
  functional   - continuous-outcome functional bounds and IQR bounds
  oracle       - brute-force verification oracles and simulators
  inference    - estimation and intersection-bounds confidence intervals
  cli          - batch command-line interface
"""

from . import binary, functional, generalized, inference, oracle, probability
from .errors import RoyBoundsError
from .functional import OutcomeSample, build_subcdf
from .probability import (
    CellProbs,
    InstrumentTable,
    IntervalBound,
    PotentialJoint,
    SimplexPolytope,
    validate_cells,
)

__version__ = "0.1.0"

__all__ = [
    "CellProbs",
    "InstrumentTable",
    "IntervalBound",
    "OutcomeSample",
    "PotentialJoint",
    "RoyBoundsError",
    "SimplexPolytope",
    "binary",
    "build_subcdf",
    "functional",
    "generalized",
    "inference",
    "oracle",
    "probability",
    "validate_cells",
]
