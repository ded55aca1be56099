"""3D leader-follower formation control over directed triangulated sensing
graphs: coordinate geometry, decentralized controllers, a simulation engine,
and the numerical verification suites."""

from .controller import ControlGains, FormationErrors, LyapunovRecord, control, errors_of
from .engine import ScaleEvent, SimConfig, TrajectoryLog, WorldState, monte_carlo, run
from .errors import (
    BisphericError,
    DegenerateGeometryError,
    InvalidSpecError,
    ScenarioError,
    SimulationError,
    UnsupportedTargetError,
)
from .geometry import (
    BisphericalBasis,
    BisphericalCoords,
    VirtualFrame,
    basis_at,
    bearing,
    from_cartesian,
    signed_volume,
    stacked_volumes,
    to_cartesian,
)
from .graph import SensingGraph, TetrahedronRef, henneberg_grow, tetrahedra, validate_graph
from .sensing import AgentFrame, SensedView, sense
from .shape import (
    BisphericalTargets,
    FormationSignature,
    ShapeSpec,
    canonical_embedding,
    lemma1_oracle,
    signature_of,
    spec_from_embedding,
    targets_from_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AgentFrame",
    "BisphericError",
    "BisphericalBasis",
    "BisphericalCoords",
    "BisphericalTargets",
    "ControlGains",
    "DegenerateGeometryError",
    "FormationErrors",
    "FormationSignature",
    "InvalidSpecError",
    "LyapunovRecord",
    "ScaleEvent",
    "ScenarioError",
    "SensedView",
    "SensingGraph",
    "ShapeSpec",
    "SimConfig",
    "SimulationError",
    "TetrahedronRef",
    "TrajectoryLog",
    "UnsupportedTargetError",
    "VirtualFrame",
    "WorldState",
    "basis_at",
    "bearing",
    "canonical_embedding",
    "control",
    "errors_of",
    "from_cartesian",
    "henneberg_grow",
    "lemma1_oracle",
    "monte_carlo",
    "run",
    "sense",
    "signature_of",
    "signed_volume",
    "spec_from_embedding",
    "stacked_volumes",
    "targets_from_spec",
    "tetrahedra",
    "to_cartesian",
    "validate_graph",
]
