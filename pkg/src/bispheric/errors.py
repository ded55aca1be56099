"""Exception types shared across the package."""


class BisphericError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometryError(BisphericError):
    """Collocated points, collinear triples, or a vanishing denominator."""


class InvalidSpecError(BisphericError):
    """A shape specification violates a structural invariant."""


class UnsupportedTargetError(BisphericError):
    """A shape specification is structurally fine but has no defined targets
    (e.g. a zero desired signed volume leaves the dihedral target undefined)."""


class ScenarioError(BisphericError):
    """A scenario file failed schema validation or refers to missing entities."""


class SimulationError(BisphericError):
    """The integrator produced a non-finite state or was misconfigured."""
