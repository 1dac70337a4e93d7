"""Exception hierarchy shared across the toolkit."""


class HorizonKitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(HorizonKitError, ValueError):
    pass


class StructuralError(HorizonKitError, ValueError):
    """Malformed abstract-index structure (repeated free index, bad variance...)."""


class UsageError(HorizonKitError, ValueError):
    pass


class UnsupportedHeadError(HorizonKitError, ValueError):
    pass


class SingularMetricError(HorizonKitError, ArithmeticError):
    def __init__(self, det: float, point=None):
        super().__init__(f"metric is singular (det={det:.3e}) at {point}")
        self.det = det
        self.point = point


class DomainError(HorizonKitError, ValueError):
    pass


class GeometryError(HorizonKitError):
    pass


class DegenerateHorizonError(GeometryError):
    pass


class NonConstantSurfaceGravityError(GeometryError):
    def __init__(self, deviation: float):
        super().__init__(f"surface gravity not constant on the horizon (max deviation {deviation:.3e})")
        self.deviation = deviation


class HypothesisViolation(GeometryError):
    pass


class OrientationError(GeometryError):
    pass


class BlockError(HorizonKitError, ValueError):
    """Tensor expected to live on E (x) E has components along V or the transverse direction."""


class UnknownSpacetimeError(HorizonKitError, KeyError):
    pass


class CorruptSpecError(HorizonKitError):
    pass
