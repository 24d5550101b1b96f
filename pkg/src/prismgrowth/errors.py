class PrismGrowthError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(PrismGrowthError):
    """A facet vanished or the crystal self-intersects (extinction / topology event)."""


class ConfigError(PrismGrowthError, ValueError):
    pass


class StabilityError(PrismGrowthError):
    """Explicit time step exceeds the stability bound."""


class FlowError(PrismGrowthError):
    """Integrated planar flow failed the bijectivity check."""


class NoConvergence(PrismGrowthError):
    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


class DomainError(PrismGrowthError):
    """The crystal no longer fits inside the computational box."""
