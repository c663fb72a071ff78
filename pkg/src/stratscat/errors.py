"""Exception types raised across the package."""


class StratScatError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(StratScatError):
    pass


class EquatorialEvaluation(StratScatError):
    pass


class BelowExpansionRadius(StratScatError):
    pass


class NonzeroLambdaRequired(StratScatError):
    pass


class CriticalAngle(StratScatError):
    pass


class BelowThreshold(StratScatError):
    pass


class NoCrossing(StratScatError):
    pass


class EquatorialInput(StratScatError):
    pass


class TotalInternalReflection(StratScatError):
    pass


class AntipodeProximity(StratScatError):
    pass


class GridResolutionExceeded(StratScatError):
    pass


class SingularBoundarySystem(StratScatError):
    pass


class NonOrthogonalSource(StratScatError):
    pass


class InsufficientFamilyResolution(StratScatError):
    pass


class DegenerateMultiplier(StratScatError):
    pass


class EquatorBand(StratScatError):
    pass


class VanishingCoefficient(StratScatError):
    pass


class IllPosedKernel(StratScatError):
    pass


class SteplikeUnsupported(StratScatError):
    pass


class IoFailure(StratScatError):
    pass
