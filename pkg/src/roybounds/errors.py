"""Exception hierarchy for roybounds.

Input-validation errors and substantive findings are kept distinct:
crossed bounds are *reported* (they are evidence against the model),
while an infeasible polytope or malformed table raises.
"""


class RoyBoundsError(Exception):
    """Base class for all roybounds errors."""


class NegativeMass(RoyBoundsError):
    """A probability input was negative beyond tolerance."""


class NotNormalized(RoyBoundsError):
    """Probabilities do not sum to one beyond tolerance."""


class Infeasible(RoyBoundsError):
    """A polytope has no feasible point."""


class InfeasibleModel(Infeasible):
    """The observed tables are inconsistent with the model."""


class InfeasibleLP(Infeasible):
    """No response-type distribution reproduces the observed tables."""


class OutcomeInstrumentDependence(RoyBoundsError):
    """P(Y=1|z) varies with z: the binary Roy model plus exclusion is rejected."""


class MissingCell(RoyBoundsError):
    """A required covariate support point has no data."""


class DegenerateConditioning(RoyBoundsError):
    """A conditioning event has (near) zero probability."""


class DegenerateDenominator(RoyBoundsError):
    """A ratio bound's denominator is (near) zero."""


class ZeroConditioningCell(DegenerateConditioning):
    """The conditioning cell P(Y=0,D=0|z) is zero."""


class ZeroSectorProbability(RoyBoundsError):
    """P(D=d|z) is zero where a sector-conditional quantity is required."""


class EmptySample(RoyBoundsError):
    """An operation requires a nonempty sample."""


class EmptySector(EmptySample):
    """No observations in the requested sector."""


class EmptyInstrumentCell(EmptySample):
    """No observations at some instrument point."""


class BadInterval(RoyBoundsError):
    """Interval endpoints are not ordered."""


class QuantileOutOfRange(RoyBoundsError):
    """Quantile levels must satisfy 0 < q1 < q2 < 1."""


class InsufficientSectorMass(RoyBoundsError):
    """The requested interquantile mass exceeds the sector's identified mass."""


class OutOfRange(RoyBoundsError):
    """A witness parameter lies outside its admissible range."""


class BoundsViolated(RoyBoundsError):
    """Candidate marginal distributions violate the functional bounds."""


class BoundsCross(RoyBoundsError):
    """A bound interval is empty: the model is rejected by the data."""


class InputError(RoyBoundsError):
    """Malformed user input (CLI/data layer)."""
