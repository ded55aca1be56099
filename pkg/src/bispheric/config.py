"""Scenario files: schema validation, loading, and the two bundled demo
scenarios (one file = one scenario; diffable JSON for golden tests)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .controller import ControlGains
from .engine import ScaleEvent, SimConfig
from .errors import ScenarioError
from .graph import SensingGraph
from .shape import ShapeSpec, spec_from_embedding


def _schema() -> dict:
    with resources.files("bispheric").joinpath("scenario.schema.json").open() as fh:
        return json.load(fh)


def load_raw(path) -> dict:
    """Parse and schema-validate a scenario file. Raises ScenarioError on
    malformed JSON or schema violations."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return validate_dict(data)


def validate_dict(data: dict) -> dict:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"scenario schema violation: {exc.message}") from exc
    return data


def graph_from_config(data: dict) -> SensingGraph:
    """Build the graph without requiring it to be valid (the validate-graph
    command reports violations itself)."""
    g = data["graph"]
    return SensingGraph(n=int(g["n"]), edges=tuple((int(j), int(i)) for j, i in g["edges"]))


@dataclass(eq=False)
class Scenario:
    name: str
    graph: SensingGraph
    spec: ShapeSpec
    gains: ControlGains
    cfg: SimConfig


def scenario_from_dict(data: dict) -> Scenario:
    """Assemble a full scenario. Schema must already hold; domain-level
    problems (invalid graph, unrealizable shape, missing agents) raise the
    corresponding domain errors."""
    validate_dict(data)
    g = graph_from_config(data)
    shape = data["shape"]
    if "embedding" in shape:
        p_star = np.asarray(shape["embedding"], dtype=float)
        spec = spec_from_embedding(p_star, g)
    else:
        distances = {(int(j), int(i)): float(d) for j, i, d in shape["distances"]}
        spec = ShapeSpec(graph=g, distances=distances, volumes=np.asarray(shape["volumes"]))
    gd = data.get("gains", {})
    gains = ControlGains.uniform(
        g.n,
        kappa2=gd.get("kappa2", 2.0),
        kappa=gd.get("kappa", 2.0),
        lam=gd.get("lambda", 2.0),
        gamma=gd.get("gamma", 2.0),
    )
    sim = data.get("sim", {})
    init = data.get("init", {"cube_half_width": 2.0})
    cfg = SimConfig(
        dt=sim.get("dt", 0.005),
        t_end=sim.get("t_end", 20.0),
        integrator=sim.get("integrator", "rk4"),
        events=tuple(ScaleEvent(t=e["t"], d21_star=e["d21_star"]) for e in sim.get("events", [])),
        seed=data.get("seed", 0),
        init_half_width=init.get("cube_half_width"),
        init_positions=init.get("positions"),
        min_start_separation=init.get("min_separation", 1e-3),
        log_every=sim.get("log_every", 1),
        random_frames=data.get("frames", {}).get("random", False),
        noise=data.get("sensing", {}).get("noise", 0.0),
    )
    return Scenario(
        name=data.get("name", "scenario"), graph=g, spec=spec, gains=gains, cfg=cfg
    )


def load_scenario(path) -> Scenario:
    return scenario_from_dict(load_raw(path))


SIX_AGENT_EDGES = [
    [2, 1], [3, 1], [3, 2], [4, 1], [4, 2], [4, 3],
    [5, 2], [5, 3], [5, 4], [6, 3], [6, 4], [6, 5],
]


def six_agent_scenario() -> dict:
    """Six agents forming the benchmark shape (all edge lengths 1 except the
    two sqrt(2)/2 pairs), converging by t = 10 and doubling scale until 20.

    The stated volume magnitude is the one realizable from those distances,
    sqrt(5)/24, with the +,+,- orientation pattern.
    """
    r = math.sqrt(2.0) / 2.0
    v = math.sqrt(5.0) / 24.0
    distances = [[j, i, r if (j, i) in ((3, 2), (6, 4)) else 1.0] for j, i in SIX_AGENT_EDGES]
    return {
        "version": 1,
        "name": "six-agent-scale",
        "graph": {"n": 6, "edges": SIX_AGENT_EDGES},
        "shape": {"distances": distances, "volumes": [v, v, -v]},
        "gains": {"kappa2": 2.0, "kappa": 2.0, "lambda": 2.0, "gamma": 2.0},
        "sim": {
            "integrator": "rk4",
            "dt": 0.005,
            "t_end": 20.0,
            "log_every": 1,
            "events": [{"t": 10.0, "d21_star": 2.0}],
        },
        "init": {"cube_half_width": 2.0},
        "seed": 42,
    }


def octahedron_embedding() -> np.ndarray:
    """Unit octahedron with the agents assigned so the sensing edges carry
    length 1 except the two body diagonals (3,2) and (6,4) at sqrt(2); the
    tetrahedron volumes come out sqrt(2)/12, sqrt(2)/12, -sqrt(2)/12."""
    h = 1.0 / math.sqrt(2.0)
    return np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.5, 0.5, -h],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, h],
        ]
    )


def octahedron_scenario() -> dict:
    """Unit-octahedron target for the same sensing graph (no scale event)."""
    return {
        "version": 1,
        "name": "octahedron",
        "graph": {"n": 6, "edges": SIX_AGENT_EDGES},
        "shape": {"embedding": octahedron_embedding().tolist()},
        "gains": {"kappa2": 2.0, "kappa": 2.0, "lambda": 2.0, "gamma": 2.0},
        "sim": {"integrator": "rk4", "dt": 0.005, "t_end": 10.0, "log_every": 1},
        "init": {"cube_half_width": 2.0},
        "seed": 42,
    }
