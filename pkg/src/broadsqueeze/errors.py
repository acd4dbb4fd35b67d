"""Exception hierarchy shared across the package."""


class PhysicsDomainError(ValueError):
    """An input is valid Python but outside the physical/numerical domain of an operation."""


class UndefinedQuantityError(PhysicsDomainError):
    """The requested quantity is undefined for this input (e.g. zero mean photon number)."""


class DegenerateSlopeError(PhysicsDomainError):
    """Slope S <= 3: the thermal ladder parameter would reach or exceed 1."""


class UnphysicalSlopeError(PhysicsDomainError):
    """Slope S > 9: steeper than a single squeezed mode allows."""


class TruncationError(PhysicsDomainError):
    """The requested photon-number cutoff leaves more tail mass than tolerated."""


class PeakFitError(PhysicsDomainError):
    """No usable peaks could be found or fitted in a pulse-height spectrum."""


class GridResolutionError(PhysicsDomainError):
    """A frequency grid is too coarse for the structure it has to resolve."""


class SchmidtError(PhysicsDomainError):
    """The mode decomposition failed to converge."""


class UnresolvedPeaksWarning(UserWarning):
    """Two fitted peaks are closer than twice their width."""


class NonMonotoneWeightsWarning(UserWarning):
    """Mode weights are not monotonically decreasing; a geometric fit is meaningless."""
