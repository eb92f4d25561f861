"""Scenario description, JSON (de)serialisation and eager validation.

File layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "name": "...",
      "controller": "state" | "output" | "static",
      "agents": [
        {"name": "...", "A": [[...]], "b": [[...]], "c": [[...]], "x0": [...],
         "poles": [...], "observer_poles": [...], "R": 1.0, "weight": 1.0,
         "xi0": [...], "static": {"P": [[...]], "nu": 2.0, "lambda_hat": 2.0}}
      ],
      "topology": {"graph": {"edges": [{"from": 1, "to": 2, "weight": 1.0}]}}
               or {"schedule": {"graphs": [{"edges": [...]}, ...],
                                "order": [1, 2], "dwell": 5.0}},
      "numerics": {"dt": 0.001, "t_final": 40.0, "tolerance": 0.01, "stride": 1},
      "output": {"trajectory": "trajectory.csv", "metrics": "metrics.json"}
    }

Agents, graphs in ``order`` and edge endpoints are numbered from 1.  An edge
``{"from": j, "to": i}`` means agent ``i`` receives information from ``j``.
Complex poles are written as ``[re, im]`` pairs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, ParseError, ValidationError
from .graph import (
    Digraph,
    SwitchingSchedule,
    bidirected_path,
    is_balanced,
    is_strongly_connected,
)
from .plant import Plant, validate_plant
from .controllers import ControllerKind, StaticCertificate, verify_static_certificate

__all__ = [
    "SCHEMA_VERSION",
    "Scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "parse_scenario",
    "load_scenario",
    "validate_scenario",
    "scenario_hash",
    "demo_scenario",
    "demo_plants",
    "demo_graphs",
]

SCHEMA_VERSION = 1

DEFAULT_DT = 1e-3
DEFAULT_T_FINAL = 40.0
DEFAULT_TOLERANCE = 1e-2


@dataclass(frozen=True, eq=False)
class Scenario:
    plants: tuple[Plant, ...]
    x0: tuple[np.ndarray, ...]
    schedule: SwitchingSchedule
    controller: ControllerKind = ControllerKind.STATE
    weights: tuple[float, ...] | None = None
    poles: tuple[Any, ...] | None = None
    observer_poles: tuple[Any, ...] | None = None
    R: tuple[float | None, ...] | None = None
    static: tuple[StaticCertificate | None, ...] | None = None
    xi0: tuple[np.ndarray | None, ...] | None = None
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL
    tolerance: float = DEFAULT_TOLERANCE
    stride: int = 1
    name: str = ""
    outputs: dict = field(default_factory=lambda: {"trajectory": "trajectory.csv", "metrics": "metrics.json"})

    def __post_init__(self):
        object.__setattr__(self, "controller", ControllerKind(self.controller))
        n_agents = len(self.plants)

        def per_agent(value, name):
            if value is None:
                return (None,) * n_agents
            value = tuple(value)
            if len(value) != n_agents:
                raise DimensionMismatch(f"{name} has {len(value)} entries for {n_agents} agents")
            return value

        object.__setattr__(self, "plants", tuple(self.plants))
        object.__setattr__(self, "x0", tuple(np.asarray(x, dtype=float).reshape(-1) for x in self.x0))
        if len(self.x0) != n_agents:
            raise DimensionMismatch(f"{len(self.x0)} initial states for {n_agents} agents")
        w = per_agent(self.weights, "weights")
        object.__setattr__(self, "weights", tuple(1.0 if v is None else float(v) for v in w))
        for name in ("poles", "observer_poles", "R", "static", "xi0"):
            object.__setattr__(self, name, per_agent(getattr(self, name), name))

    @property
    def n_agents(self) -> int:
        return len(self.plants)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def __eq__(self, other):
        return isinstance(other, Scenario) and scenario_to_dict(self) == scenario_to_dict(other)

    def __hash__(self):
        return hash(scenario_hash(self))


# -- serialisation ---------------------------------------------------------


def _matrix_out(M) -> list:
    return np.asarray(M, dtype=float).tolist()


def _poles_out(poles):
    if poles is None:
        return None
    out = []
    for p in np.atleast_1d(np.asarray(poles, dtype=complex)):
        out.append(float(p.real) if p.imag == 0 else [float(p.real), float(p.imag)])
    return out


def _graph_out(g: Digraph) -> dict:
    return {"edges": [{"from": s, "to": d, "weight": w} for s, d, w in g.edges(one_based=True)]}


def scenario_to_dict(s: Scenario) -> dict:
    agents = []
    for k, p in enumerate(s.plants):
        a: dict[str, Any] = {
            "name": p.name,
            "A": _matrix_out(p.A),
            "b": _matrix_out(p.b),
            "c": _matrix_out(p.c),
            "x0": s.x0[k].tolist(),
            "weight": s.weights[k],
        }
        if s.poles[k] is not None:
            a["poles"] = _poles_out(s.poles[k])
        if s.observer_poles[k] is not None:
            a["observer_poles"] = _poles_out(s.observer_poles[k])
        if s.R[k] is not None:
            a["R"] = float(s.R[k])
        if s.xi0[k] is not None:
            a["xi0"] = np.asarray(s.xi0[k], dtype=float).tolist()
        if s.static[k] is not None:
            cert = s.static[k]
            a["static"] = {"P": _matrix_out(cert.P), "nu": float(cert.nu), "lambda_hat": float(cert.lambda_hat)}
        agents.append(a)
    sch = s.schedule
    if len(sch.order) == 1 and math.isinf(sch.dwell):
        topology = {"graph": _graph_out(sch.graphs[0])}
    else:
        topology = {
            "schedule": {
                "graphs": [_graph_out(g) for g in sch.graphs],
                "order": [k + 1 for k in sch.order],
                "dwell": sch.dwell,
            }
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "controller": s.controller.value,
        "agents": agents,
        "topology": topology,
        "numerics": {"dt": s.dt, "t_final": s.t_final, "tolerance": s.tolerance, "stride": s.stride},
        "output": dict(s.outputs),
    }


def scenario_hash(s: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ParseError("expected an object", where)
    if key not in d:
        raise ParseError("missing required field", f"{where}.{key}")
    return d[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", where)
    return float(value)


def _matrix_in(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("expected a numeric (nested) array", where) from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim > 2:
        raise ParseError("expected at most a 2-d array", where)
    return arr


def _poles_in(value, where: str):
    if value is None:
        return None
    if not isinstance(value, list):
        raise ParseError("expected a list of poles", where)
    out = []
    for k, p in enumerate(value):
        if isinstance(p, list):
            if len(p) != 2:
                raise ParseError("complex poles are [re, im] pairs", f"{where}[{k}]")
            out.append(complex(_number(p[0], f"{where}[{k}][0]"), _number(p[1], f"{where}[{k}][1]")))
        else:
            out.append(complex(_number(p, f"{where}[{k}]")))
    return np.array(out)


def _graph_in(value, n: int, where: str) -> Digraph:
    edges_raw = _require(value, "edges", where)
    if not isinstance(edges_raw, list):
        raise ParseError("expected a list of edges", f"{where}.edges")
    edges = []
    for k, e in enumerate(edges_raw):
        ew = f"{where}.edges[{k}]"
        src = _require(e, "from", ew)
        dst = _require(e, "to", ew)
        if not (isinstance(src, int) and isinstance(dst, int)) or isinstance(src, bool) or isinstance(dst, bool):
            raise ParseError("edge endpoints must be integers", ew)
        edges.append((src, dst, _number(e.get("weight", 1.0), f"{ew}.weight")))
    try:
        return Digraph.from_edges(n, edges, one_based=True)
    except ValueError as exc:
        raise ParseError(str(exc), where) from None


def _unchecked_schedule(graphs, order, dwell) -> SwitchingSchedule:
    # graph admissibility is reported by validate_scenario, not here
    obj = object.__new__(SwitchingSchedule)
    object.__setattr__(obj, "graphs", tuple(graphs))
    object.__setattr__(obj, "order", tuple(order))
    object.__setattr__(obj, "dwell", float(dwell))
    return obj


def scenario_from_dict(data: dict, validate: bool = True) -> Scenario:
    """Build a :class:`Scenario`; with ``validate`` every standing assumption is checked."""
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})", "schema_version")
    agents_raw = _require(data, "agents", "scenario")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ParseError("need a non-empty list of agents", "agents")
    plants, x0, weights, poles, opoles, R, static, xi0 = [], [], [], [], [], [], [], []
    for k, a in enumerate(agents_raw):
        where = f"agents[{k}]"
        A = _matrix_in(_require(a, "A", where), f"{where}.A")
        b = _matrix_in(_require(a, "b", where), f"{where}.b")
        c = _matrix_in(_require(a, "c", where), f"{where}.c")
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        try:
            p = Plant(A, b, c, name=str(a.get("name", f"agent{k + 1}")))
        except DimensionMismatch as exc:
            raise ParseError(str(exc), where) from None
        plants.append(p)
        x = _matrix_in(_require(a, "x0", where), f"{where}.x0").reshape(-1)
        if x.size != p.n:
            raise ParseError(f"x0 has {x.size} entries for a {p.n}-state agent", f"{where}.x0")
        x0.append(x)
        weights.append(_number(a.get("weight", 1.0), f"{where}.weight"))
        poles.append(_poles_in(a.get("poles"), f"{where}.poles"))
        opoles.append(_poles_in(a.get("observer_poles"), f"{where}.observer_poles"))
        R.append(None if a.get("R") is None else _number(a["R"], f"{where}.R"))
        if a.get("xi0") is not None:
            xi = _matrix_in(a["xi0"], f"{where}.xi0").reshape(-1)
            if xi.size != p.n:
                raise ParseError(f"xi0 has {xi.size} entries for a {p.n}-state agent", f"{where}.xi0")
            xi0.append(xi)
        else:
            xi0.append(None)
        if a.get("static") is not None:
            st = a["static"]
            sw = f"{where}.static"
            P = _matrix_in(_require(st, "P", sw), f"{sw}.P")
            static.append(
                StaticCertificate(
                    P, _number(_require(st, "nu", sw), f"{sw}.nu"), _number(st.get("lambda_hat", 2.0), f"{sw}.lambda_hat")
                )
            )
        else:
            static.append(None)
        if "z0" in a:
            raise ParseError("z0 cannot be set: the abstraction starts at the agent output", f"{where}.z0")

    n = len(plants)
    topo = _require(data, "topology", "scenario")
    if isinstance(topo, dict) and "graph" in topo:
        schedule = _unchecked_schedule([_graph_in(topo["graph"], n, "topology.graph")], (0,), math.inf)
    elif isinstance(topo, dict) and "schedule" in topo:
        sch = topo["schedule"]
        graphs_raw = _require(sch, "graphs", "topology.schedule")
        if not isinstance(graphs_raw, list) or not graphs_raw:
            raise ParseError("need a non-empty list of graphs", "topology.schedule.graphs")
        graphs = [_graph_in(g, n, f"topology.schedule.graphs[{k}]") for k, g in enumerate(graphs_raw)]
        order_raw = sch.get("order", list(range(1, len(graphs) + 1)))
        if not isinstance(order_raw, list) or not order_raw or any(
            not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= len(graphs) for k in order_raw
        ):
            raise ParseError(f"order must list graph numbers 1..{len(graphs)}", "topology.schedule.order")
        dwell = _number(_require(sch, "dwell", "topology.schedule"), "topology.schedule.dwell")
        if not dwell > 0:
            raise ParseError("dwell must be positive", "topology.schedule.dwell")
        schedule = _unchecked_schedule(graphs, [k - 1 for k in order_raw], dwell)
    else:
        raise ParseError("topology needs either 'graph' or 'schedule'", "topology")

    controller = data.get("controller", "state")
    try:
        controller = ControllerKind(controller)
    except ValueError:
        raise ParseError(f"unknown controller {controller!r}", "controller") from None
    num = data.get("numerics", {})
    dt = _number(num.get("dt", DEFAULT_DT), "numerics.dt")
    t_final = _number(num.get("t_final", DEFAULT_T_FINAL), "numerics.t_final")
    tolerance = _number(num.get("tolerance", DEFAULT_TOLERANCE), "numerics.tolerance")
    stride = num.get("stride", 1)
    if not isinstance(stride, int) or isinstance(stride, bool) or stride < 1:
        raise ParseError("stride must be a positive integer", "numerics.stride")
    for name, val in (("dt", dt), ("t_final", t_final), ("tolerance", tolerance)):
        if not val > 0:
            raise ParseError("must be positive", f"numerics.{name}")
    outputs = {"trajectory": "trajectory.csv", "metrics": "metrics.json"}
    outputs.update({k: str(v) for k, v in data.get("output", {}).items()})

    s = Scenario(
        plants=tuple(plants),
        x0=tuple(x0),
        schedule=schedule,
        controller=controller,
        weights=tuple(weights),
        poles=tuple(poles),
        observer_poles=tuple(opoles),
        R=tuple(R),
        static=tuple(static),
        xi0=tuple(xi0),
        dt=dt,
        t_final=t_final,
        tolerance=tolerance,
        stride=stride,
        name=str(data.get("name", "")),
        outputs=outputs,
    )
    if validate:
        failures = validate_scenario(s)
        if failures:
            raise ValidationError(failures)
    return s


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, abs(ratio))


def validate_scenario(s: Scenario) -> list[tuple[str, str]]:
    """Run every plant, graph and numerics check; return ``(check, message)`` failures."""
    failures = []
    for k, p in enumerate(s.plants):
        rep = validate_plant(p)
        label = f"agent {k + 1} ({p.name})" if p.name else f"agent {k + 1}"
        if not (rep.controllable and rep.observable):
            failures.append(("minimality", f"{label}: " + "; ".join(m for m in rep.messages if "zero" not in m)))
        if not rep.no_origin_zero:
            failures.append(("origin_zero", f"{label}: check_no_origin_zero failed, {rep.messages[-1]}"))
        if s.controller is ControllerKind.STATIC:
            cert = s.static[k]
            if cert is None:
                failures.append(("certificate", f"{label}: static controller needs a (P, nu) certificate"))
            elif not (cert.lambda_hat > 1 and verify_static_certificate(p, cert.P, cert.nu)):
                failures.append(("certificate", f"{label}: static certificate (P, nu, lambda_hat) is invalid"))
        if any(w <= 0 for w in (s.weights[k],)):
            failures.append(("dimensions", f"{label}: weight must be positive"))
    for k, g in enumerate(s.schedule.graphs):
        if g.n != s.n_agents:
            failures.append(("dimensions", f"graph {k + 1} has {g.n} nodes for {s.n_agents} agents"))
            continue
        if not is_strongly_connected(g):
            failures.append(("connectivity", f"graph {k + 1} is not strongly connected"))
        if not is_balanced(g):
            failures.append(("balance", f"graph {k + 1} is not balanced (in-degree != out-degree)"))
    if not math.isinf(s.schedule.dwell) and not _is_multiple(s.schedule.dwell, s.dt):
        failures.append(
            ("grid_alignment", f"switch interval {s.schedule.dwell} is not a multiple of dt = {s.dt}")
        )
    if not _is_multiple(s.t_final, s.dt) or s.t_final < s.dt:
        failures.append(("grid_alignment", f"t_final {s.t_final} is not a positive multiple of dt = {s.dt}"))
    return failures


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", str(path)) from None
    return scenario_from_dict(data)


load_scenario = parse_scenario


# -- built-in four-agent example ---------------------------------------------

PRINTED_C3 = [[0.0, 1.0, 0.0]]
CORRECTED_C3 = [[0.0, 1.0, 1.0]]


def demo_plants(printed_agent3: bool = False) -> tuple[Plant, ...]:
    """The four heterogeneous agents; agent 3 uses the corrected output row unless asked."""
    return (
        Plant([[1.0]], [[1.0]], [[1.0]], name="agent1"),
        Plant([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]], name="agent2"),
        Plant(
            [[0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [2.0, 0.0, 1.0]],
            [[0.0], [1.0], [1.0]],
            PRINTED_C3 if printed_agent3 else CORRECTED_C3,
            name="agent3",
        ),
        Plant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]], name="agent4"),
    )


def demo_graphs() -> tuple[Digraph, Digraph]:
    """G1: bidirected path 1-2-3-4.  G2: ring 1->4->3->2->1 (arrow = head receives)."""
    g1 = bidirected_path(4)
    g2 = Digraph.from_edges(4, [(1, 4, 1.0), (4, 3, 1.0), (3, 2, 1.0), (2, 1, 1.0)], one_based=True)
    return g1, g2


DEMO_X0 = ([2.0], [-1.0, 0.5], [1.0, -2.0, 3.0], [4.0, -1.0])


def demo_scenario(
    controller: ControllerKind | str = ControllerKind.STATE,
    printed_agent3: bool = False,
    dt: float = DEFAULT_DT,
    t_final: float = DEFAULT_T_FINAL,
    stride: int = 1,
) -> Scenario:
    """Four agents, switching G1, G2, G1, ... every 5 time units."""
    g1, g2 = demo_graphs()
    return Scenario(
        plants=demo_plants(printed_agent3),
        x0=tuple(np.array(x) for x in DEMO_X0),
        schedule=SwitchingSchedule((g1, g2), dwell=5.0, order=(0, 1)),
        controller=ControllerKind(controller),
        dt=dt,
        t_final=t_final,
        tolerance=DEFAULT_TOLERANCE,
        stride=stride,
        name="four-agent switching demo",
    )
