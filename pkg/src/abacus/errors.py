"""Exception hierarchy shared by all abacus modules."""


class AbacusError(Exception):
    """Base class for all domain errors raised by this package."""


class ParseError(AbacusError):
    """A graph or dataset file is syntactically malformed."""


class CycleError(AbacusError):
    """A computation graph contains a directed cycle."""


class ShapeError(AbacusError):
    """Tensor shapes are missing or incompatible at an operator."""


class MissingAttr(AbacusError):
    """An operator lacks an attribute required by its type."""


class EmptyCorpus(AbacusError):
    """An embedding training corpus contains no token bags."""


class TooFewPoints(AbacusError):
    """A dataset is too small to split."""


class LengthMismatch(AbacusError):
    """Paired vectors have different lengths."""


class NonPositiveTruth(AbacusError):
    """A relative-error denominator is zero or negative."""


class InconsistentLayout(AbacusError):
    """Data points in one dataset disagree on feature layout."""


class DegenerateTarget(AbacusError):
    """All target values are identical (flagged, not raised, by training)."""


class LayoutMismatch(AbacusError):
    """A feature vector's layout does not match the predictor's."""


class VersionMismatch(AbacusError):
    """A persisted artifact has an unknown magic string or version."""


class GenerationError(AbacusError):
    """The random network generator exhausted its retry budget."""


class InvalidAssignment(AbacusError):
    """A machine assignment has the wrong length or an out-of-range entry."""


class InfeasibleInstance(AbacusError):
    """No machine assignment satisfies the memory capacities."""


class TooLarge(AbacusError):
    """An exhaustive enumeration would exceed the configured cap."""
