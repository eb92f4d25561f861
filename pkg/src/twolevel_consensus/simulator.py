"""Closed-loop simulation of the heterogeneous network.

The stacked state is ``[x_1, ..., x_N, z_1, ..., z_N, xi_1, ..., xi_N]``
(the observer block only for output feedback).  Every control law is linear,
so on each switching segment the vector field assembled from
:func:`controller_rates` is a constant matrix; it is extracted once per graph
and handed to the RK4 kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .abstraction import (
    Interface,
    SimCertificate,
    build_certificate,
    build_interface,
    observer_interface,
    simulation_value,
    static_output_interface,
    tracking_bound,
)
from .controllers import (
    AgentRuntimeState,
    ControllerKind,
    ControllerSpec,
    controller_rates,
    make_output_feedback,
    make_state_feedback,
    make_static_output_feedback,
)
from .errors import InvalidScenario, NonFinite, ValidationError
from .graph import Digraph
from .scenario import Scenario, scenario_hash, validate_scenario

__all__ = [
    "Trajectory",
    "RunMetrics",
    "StateLayout",
    "ave",
    "build_controller",
    "init_network",
    "step_rk4",
    "run",
    "compute_metrics",
    "agent_certificates",
    "effective_interface",
    "concrete_states",
]


def ave(y0, weights=None) -> float:
    """Arithmetic mean, or ``sum(w y) / sum(w)`` when weights are given."""
    y0 = np.asarray(y0, dtype=float)
    if y0.size == 0:
        raise ValueError("need at least one value")
    if weights is None:
        return float(y0.mean())
    w = np.asarray(weights, dtype=float)
    return float(w @ y0 / w.sum())


@dataclass(frozen=True)
class StateLayout:
    dims: tuple[int, ...]
    observer: bool

    @property
    def n_agents(self) -> int:
        return len(self.dims)

    @property
    def x_offsets(self) -> list[int]:
        return [0] + list(np.cumsum(self.dims))

    @property
    def z_start(self) -> int:
        return int(sum(self.dims))

    @property
    def xi_start(self) -> int:
        return self.z_start + self.n_agents

    @property
    def size(self) -> int:
        return self.xi_start + (self.z_start if self.observer else 0)

    def x(self, s, i):
        off = self.x_offsets
        return s[..., off[i] : off[i + 1]]

    def z(self, s):
        return s[..., self.z_start : self.xi_start]

    def xi(self, s, i):
        off = self.x_offsets
        return s[..., self.xi_start + off[i] : self.xi_start + off[i + 1]]


@dataclass
class Trajectory:
    times: np.ndarray
    y: np.ndarray  # (T, N)
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray
    e: np.ndarray
    reference: float  # Ave(y(0)), or the weighted average
    weights: np.ndarray
    x: list[np.ndarray] | None = None  # per agent (T, n_i)
    xi: list[np.ndarray] | None = None
    scenario_hash: str = ""
    controller: str = ""

    @property
    def n_agents(self) -> int:
        return self.y.shape[1]

    def subsample(self, stride: int) -> "Trajectory":
        if stride == 1:
            return self
        idx = np.arange(0, self.times.size, stride)
        if idx[-1] != self.times.size - 1:
            idx = np.append(idx, self.times.size - 1)
        take = lambda a: None if a is None else [m[idx] for m in a]  # noqa: E731
        return Trajectory(
            self.times[idx], self.y[idx], self.z[idx], self.u[idx], self.v[idx], self.e[idx],
            self.reference, self.weights, take(self.x), take(self.xi), self.scenario_hash, self.controller,
        )


@dataclass
class RunMetrics:
    final_errors: list[float]
    max_sum_drift: float
    settling_time: float | None
    bound_violations: int
    ave_y0: float
    max_abs_error: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def settled(self) -> bool:
        return self.settling_time is not None

    def to_dict(self) -> dict:
        return {
            "final_errors": [float(e) for e in self.final_errors],
            "settling_time": self.settling_time,
            "max_sum_drift": float(self.max_sum_drift),
            "bound_violations": int(self.bound_violations),
            "ave_y0": float(self.ave_y0),
            **self.extras,
        }


def build_controller(s: Scenario) -> ControllerSpec:
    interfaces = [build_interface(p, s.poles[k], s.R[k]) for k, p in enumerate(s.plants)]
    if s.controller is ControllerKind.STATE:
        return make_state_feedback(s.plants, interfaces, s.weights)
    if s.controller is ControllerKind.OUTPUT:
        return make_output_feedback(s.plants, interfaces, s.observer_poles, s.weights)
    return make_static_output_feedback(s.plants, s.static, interfaces, s.weights)


def _check(s: Scenario) -> None:
    failures = validate_scenario(s)
    if failures:
        raise ValidationError(failures)


def init_network(s: Scenario, spec: ControllerSpec | None = None) -> np.ndarray:
    """Stacked initial state with ``z_i(0) = c_i x_i(0)`` and ``xi_i(0) = 0`` unless overridden."""
    _check(s)
    layout = _layout(s)
    s0 = np.zeros(layout.size)
    for i, (p, x) in enumerate(zip(s.plants, s.x0)):
        if x.size != p.n:
            raise InvalidScenario(f"agent {i + 1}: x0 has {x.size} entries, expected {p.n}")
        off = layout.x_offsets
        s0[off[i] : off[i + 1]] = x
        s0[layout.z_start + i] = p.output(x)
        if layout.observer and s.xi0[i] is not None:
            s0[layout.xi_start + off[i] : layout.xi_start + off[i + 1]] = s.xi0[i]
    return s0


def _layout(s: Scenario) -> StateLayout:
    return StateLayout(tuple(p.n for p in s.plants), s.controller is ControllerKind.OUTPUT)


def step_rk4(state, t: float, dt: float, rate) -> np.ndarray:
    """One classical RK4 step of ``ds/dt = rate(t, s)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = np.asarray(state, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rate(t, s)
        k2 = rate(t + 0.5 * dt, s + 0.5 * dt * k1)
        k3 = rate(t + 0.5 * dt, s + 0.5 * dt * k2)
        k4 = rate(t + dt, s + dt * k3)
        out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"non-finite state after step at t = {t}")
    return out


def network_field(spec: ControllerSpec, layout: StateLayout, graph: Digraph):
    """Closed-loop field ``s -> (ds/dt, u, v)`` with ``graph`` held fixed."""

    def f(s):
        z = layout.z(s)
        ds = np.zeros_like(s)
        u_all = np.zeros(layout.n_agents)
        v_all = np.zeros(layout.n_agents)
        off = layout.x_offsets
        for i, p in enumerate(spec.plants):
            x = layout.x(s, i)
            xi = layout.xi(s, i) if layout.observer else None
            u, dz, dxi = controller_rates(spec, i, 0.0, AgentRuntimeState(x, float(z[i]), xi), z, graph)
            ds[off[i] : off[i + 1]] = p.A @ x + p.b[:, 0] * u
            ds[layout.z_start + i] = dz
            if dxi is not None:
                ds[layout.xi_start + off[i] : layout.xi_start + off[i + 1]] = dxi
            u_all[i], v_all[i] = u, dz
        return ds, u_all, v_all

    return f


def linearize(spec: ControllerSpec, layout: StateLayout, graph: Digraph):
    """Matrices ``(M, Ku, Kv)`` with ``ds/dt = M s``, ``u = Ku s``, ``v = Kv s``.

    Exact because every law is linear: column ``j`` is the field at ``e_j``.
    """
    f = network_field(spec, layout, graph)
    d = layout.size
    M = np.zeros((d, d))
    Ku = np.zeros((layout.n_agents, d))
    Kv = np.zeros((layout.n_agents, d))
    eye = np.eye(d)
    for j in range(d):
        M[:, j], Ku[:, j], Kv[:, j] = f(eye[j])
    return M, Ku, Kv


def _segments(s: Scenario):
    """Yield ``(first_step, n_steps, graph_key)`` covering ``[0, n_steps]``."""
    total = s.n_steps
    sch = s.schedule
    if math.isinf(sch.dwell):
        yield 0, total, sch.order[0]
        return
    per = int(round(sch.dwell / s.dt))
    k = 0
    seg = 0
    while k < total:
        n = min(per, total - k)
        yield k, n, sch.order[seg % len(sch.order)]
        k += n
        seg += 1


def _graph_index_per_sample(s: Scenario) -> np.ndarray:
    steps = np.arange(s.n_steps + 1)
    sch = s.schedule
    if math.isinf(sch.dwell):
        return np.full(steps.size, sch.order[0])
    per = int(round(sch.dwell / s.dt))
    return np.asarray(sch.order)[(steps // per) % len(sch.order)]


def _integrate(s: Scenario, spec: ControllerSpec, layout: StateLayout, s0: np.ndarray, engine: str):
    """Full-resolution states plus the per-graph output maps."""
    maps = {}
    for key in set(s.schedule.order):
        maps[key] = linearize(spec, layout, s.schedule.graphs[key])
    states = np.empty((s.n_steps + 1, layout.size))
    states[0] = s0
    if engine == "generic":
        for k0, n, key in _segments(s):
            f = network_field(spec, layout, s.schedule.graphs[key])
            rate = lambda t, st, f=f: f(st)[0]  # noqa: E731
            for k in range(k0, k0 + n):
                states[k + 1] = step_rk4(states[k], k * s.dt, s.dt, rate)
    elif engine == "kernel":
        for k0, n, key in _segments(s):
            try:
                block = kernels.rk4_linear(maps[key][0], states[k0], s.dt, n)
            except FloatingPointError as exc:
                raise NonFinite(f"{exc} of the segment starting at t = {k0 * s.dt}") from None
            states[k0 + 1 : k0 + n + 1] = block[1:]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return states, maps


def effective_interface(spec: ControllerSpec, i: int) -> Interface:
    """Interface realised by agent ``i``'s running law.

    Output feedback acts on the plant augmented with its observer, so the
    returned interface expects the concrete state ``(x_i, xi_i)``.
    """
    iface = spec.interfaces[i]
    if spec.kind is ControllerKind.STATIC:
        return static_output_interface(iface, spec.static_gain(i))
    if spec.kind is ControllerKind.OUTPUT:
        return observer_interface(iface, spec.observer_gains[i])
    return iface


def agent_certificates(spec: ControllerSpec) -> list[tuple[Interface, SimCertificate]]:
    """Per-agent ``(interface, certificate)`` for the loop actually closed."""
    out = []
    for i in range(spec.n_agents):
        iface = effective_interface(spec, i)
        out.append((iface, build_certificate(iface)))
    return out


def concrete_states(traj: "Trajectory", i: int, iface: Interface) -> np.ndarray:
    """Samples of the state an (effective) interface acts on: ``x_i`` or ``(x_i, xi_i)``."""
    x = traj.x[i]
    if iface.plant.n == x.shape[1]:
        return x
    return np.hstack([x, traj.xi[i]])


def run(s: Scenario, engine: str = "kernel") -> tuple[Trajectory, RunMetrics]:
    """Integrate ``s`` from 0 to ``t_final`` with fixed-step RK4.

    ``engine="kernel"`` steps the linearised field with the compiled (or
    NumPy) kernel; ``engine="generic"`` calls :func:`step_rk4` on the
    per-agent rates and is kept as a slow reference path.
    """
    spec = build_controller(s)
    s0 = init_network(s, spec)
    layout = _layout(s)
    states, maps = _integrate(s, spec, layout, s0, engine)

    gidx = _graph_index_per_sample(s)
    u = np.empty((states.shape[0], layout.n_agents))
    v = np.empty_like(u)
    for key, (_, Ku, Kv) in maps.items():
        mask = gidx == key
        u[mask] = states[mask] @ Ku.T
        v[mask] = states[mask] @ Kv.T
    xs = [layout.x(states, i) for i in range(layout.n_agents)]
    y = np.column_stack([xs[i] @ p.c[0] for i, p in enumerate(s.plants)])
    z = layout.z(states)
    weights = np.asarray(s.weights)
    reference = ave(y[0], weights)
    times = np.arange(states.shape[0]) * s.dt
    traj = Trajectory(
        times=times,
        y=y,
        z=np.array(z),
        u=u,
        v=v,
        e=y - reference,
        reference=reference,
        weights=weights,
        x=[np.array(x) for x in xs],
        xi=[np.array(layout.xi(states, i)) for i in range(layout.n_agents)] if layout.observer else None,
        scenario_hash=scenario_hash(s),
        controller=s.controller.value,
    )
    metrics = compute_metrics(traj, s.tolerance, agent_certificates(spec))
    return traj.subsample(s.stride), metrics


def compute_metrics(
    traj: Trajectory,
    tolerance: float,
    certificates: list[tuple[Interface, SimCertificate]] | None = None,
) -> RunMetrics:
    """Consensus error, average drift, settling time and comparison-bound violations.

    ``max_sum_drift`` is ``max_t |sum_i w_i (z_i(t) - y_i(0))|``, which is the
    plain sum drift for unit weights.
    """
    if traj.times.size == 0:
        raise ValueError("empty trajectory")
    abs_e = np.abs(traj.e)
    final = abs_e[-1].tolist()
    w = traj.weights
    drift = float(np.max(np.abs((traj.z - traj.y[0]) @ w)))
    inside = np.all(abs_e < tolerance, axis=1)
    settling = None
    if inside[-1]:
        outside = np.nonzero(~inside)[0]
        settling = float(traj.times[0] if outside.size == 0 else traj.times[min(outside[-1] + 1, traj.times.size - 1)])
    violations = 0
    if certificates is not None and traj.x is not None:
        for i, (iface, cert) in enumerate(certificates):
            V = np.atleast_1d(simulation_value(cert, iface, traj.z[:, i], concrete_states(traj, i, iface)))
            v_sup = np.maximum.accumulate(np.abs(traj.v[:, i]))
            bound = tracking_bound(cert, V[0], traj.times - traj.times[0], v_sup)
            gap = (traj.y[:, i] - traj.z[:, i]) ** 2
            violations += int(np.sum(gap > bound + 1e-9))
    return RunMetrics(
        final_errors=final,
        max_sum_drift=drift,
        settling_time=settling,
        bound_violations=violations,
        ave_y0=traj.reference,
        max_abs_error=float(abs_e[-1].max()),
    )
