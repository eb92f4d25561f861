"""Distributed control laws built from the per-agent integrator interfaces.

Three variants share the upper-level protocol ``dz_i/dt = v_i`` with
``v_i = (1/w_i) sum_j a_ij (z_j - z_i)``:

* ``state``  -- ``u_i = k_i (x_i - X_i z_i) + U_i z_i + R_i v_i``
* ``output`` -- same law evaluated on a Luenberger observer state ``xi_i``
* ``static`` -- ``u_i = k_i (y_i - z_i) + U_i z_i + R_i v_i`` with a scalar
  output gain obtained from a certificate ``(P_i, nu_i)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .abstraction import Interface, interface_input
from .errors import CertificateInvalid, DimensionMismatch, Unobservable
from .graph import Digraph, consensus_input
from .plant import Plant, check_minimal, default_observer_poles, is_hurwitz, observer_gain

__all__ = [
    "ControllerKind",
    "StaticCertificate",
    "ControllerSpec",
    "AgentRuntimeState",
    "make_state_feedback",
    "make_output_feedback",
    "make_static_output_feedback",
    "verify_static_certificate",
    "heuristic_static_certificate",
    "controller_rates",
    "DEFAULT_LAMBDA_HAT",
]

DEFAULT_LAMBDA_HAT = 2.0


class ControllerKind(str, enum.Enum):
    STATE = "state"
    OUTPUT = "output"
    STATIC = "static"


@dataclass(frozen=True)
class StaticCertificate:
    P: np.ndarray
    nu: float
    lambda_hat: float = DEFAULT_LAMBDA_HAT

    @property
    def gain(self) -> float:
        return -self.lambda_hat * self.nu


@dataclass(frozen=True, eq=False)
class ControllerSpec:
    kind: ControllerKind
    plants: tuple[Plant, ...]
    interfaces: tuple[Interface, ...]
    weights: tuple[float, ...]
    observer_gains: tuple[np.ndarray, ...] | None = None
    static_certificates: tuple[StaticCertificate, ...] | None = None

    def __post_init__(self):
        kind = ControllerKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if (kind is ControllerKind.OUTPUT) != (self.observer_gains is not None):
            raise ValueError("observer gains are required exactly for output feedback")
        if (kind is ControllerKind.STATIC) != (self.static_certificates is not None):
            raise ValueError("static certificates are required exactly for static output feedback")

    @property
    def n_agents(self) -> int:
        return len(self.plants)

    def static_gain(self, i: int) -> float:
        return self.static_certificates[i].gain


@dataclass
class AgentRuntimeState:
    x: np.ndarray
    z: float
    xi: np.ndarray | None = None


def _check_agents(plants, interfaces, weights):
    plants = tuple(plants)
    interfaces = tuple(interfaces)
    if not plants:
        raise DimensionMismatch("at least one agent is required")
    if len(interfaces) != len(plants):
        raise DimensionMismatch(f"{len(plants)} plants but {len(interfaces)} interfaces")
    for k, (p, iface) in enumerate(zip(plants, interfaces)):
        if iface.plant != p:
            raise DimensionMismatch(f"interface {k} was built for a different plant")
    if weights is None:
        weights = (1.0,) * len(plants)
    weights = tuple(float(w) for w in weights)
    if len(weights) != len(plants):
        raise DimensionMismatch(f"{len(plants)} plants but {len(weights)} weights")
    if any(not w > 0 for w in weights):
        raise ValueError("consensus weights must be positive")
    return plants, interfaces, weights


def make_state_feedback(plants, interfaces, weights=None) -> ControllerSpec:
    plants, interfaces, weights = _check_agents(plants, interfaces, weights)
    return ControllerSpec(ControllerKind.STATE, plants, interfaces, weights)


def make_output_feedback(plants, interfaces, observer_poles=None, weights=None) -> ControllerSpec:
    plants, interfaces, weights = _check_agents(plants, interfaces, weights)
    if observer_poles is None:
        observer_poles = [None] * len(plants)
    gains = []
    for k, (p, poles) in enumerate(zip(plants, observer_poles)):
        if not check_minimal(p)[1]:
            raise Unobservable(f"agent {k + 1}: (c, A) is not observable")
        poles = default_observer_poles(p.n) if poles is None else poles
        gains.append(observer_gain(p.A, p.c, poles))
    return ControllerSpec(ControllerKind.OUTPUT, plants, interfaces, weights, observer_gains=tuple(gains))


def verify_static_certificate(p: Plant, P, nu: float) -> bool:
    """Check ``P > 0``, ``b' P = nu c`` and ``A' P + P A < 2 P b b' P``."""
    if nu == 0:
        return False
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (p.n, p.n) or not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
        return False
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P)[0] <= 0:
        return False
    if np.linalg.norm(p.b.T @ P - nu * p.c) > 1e-9 * np.linalg.norm(P, 2):
        return False
    Pb = P @ p.b
    gap = 2.0 * Pb @ Pb.T - p.A.T @ P - P @ p.A
    return bool(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0] > 0)


def heuristic_static_certificate(p: Plant) -> StaticCertificate | None:
    """Best-effort search for ``(P, nu)`` on agents with one or two states.

    Heuristic: a closed form for scalar agents and a coarse scan of the
    affine family ``P b = nu c'`` for ``n == 2``.  Returns ``None`` when
    nothing is found; it is no substitute for a semidefinite solver.
    """
    a_b, a_c = p.b.reshape(-1), p.c.reshape(-1)
    if p.n == 1:
        a, b, c = p.A.item(), a_b[0], a_c[0]
        if b == 0 or c == 0:
            return None
        s = max(1.0, 2.0 * a / b**2)
        cert = StaticCertificate(np.array([[s]]), b * s / c)
        return cert if verify_static_certificate(p, cert.P, cert.nu) else None
    if p.n != 2:
        return None
    cb = float(a_c @ a_b)
    if cb == 0:
        # b' P b > 0 forces nu * c b > 0
        return None
    # unknowns (p11, p12, p22); P b = nu c'
    b1, b2 = a_b
    E = np.array([[b1, b2, 0.0], [0.0, b1, b2]])
    base = np.linalg.lstsq(E, a_c, rcond=None)[0]
    null = np.linalg.svd(E)[2][-1]
    sign = np.sign(cb)
    scales = np.logspace(-3, 3, 61)
    for nu_mag in scales:
        nu = sign * nu_mag
        for tau in np.concatenate([[0.0], scales, -scales]):
            q = nu * base + tau * null
            P = np.array([[q[0], q[1]], [q[1], q[2]]])
            if verify_static_certificate(p, P, nu):
                return StaticCertificate(P, float(nu))
    return None


def make_static_output_feedback(
    plants,
    certificates: Sequence[StaticCertificate],
    interfaces,
    weights=None,
) -> ControllerSpec:
    plants, interfaces, weights = _check_agents(plants, interfaces, weights)
    certificates = tuple(certificates)
    if len(certificates) != len(plants):
        raise DimensionMismatch(f"{len(plants)} plants but {len(certificates)} static certificates")
    for k, (p, cert) in enumerate(zip(plants, certificates)):
        if not cert.lambda_hat > 1:
            raise CertificateInvalid(f"agent {k + 1}: lambda_hat must exceed 1, got {cert.lambda_hat}")
        if not verify_static_certificate(p, cert.P, cert.nu):
            raise CertificateInvalid(f"agent {k + 1}: (P, nu) fails the static output certificate")
        if not is_hurwitz(p.A + cert.gain * (p.b @ p.c)):
            raise CertificateInvalid(f"agent {k + 1}: A + b k c is not Hurwitz")
    return ControllerSpec(
        ControllerKind.STATIC, plants, interfaces, weights, static_certificates=certificates
    )


def controller_rates(
    spec: ControllerSpec,
    i: int,
    t: float,
    state: AgentRuntimeState,
    z_all,
    graph: Digraph,
) -> tuple[float, float, np.ndarray | None]:
    """Return ``(u_i, dz_i/dt, dxi_i/dt)`` for agent ``i``.

    ``t`` is unused by the time-invariant laws; the active ``graph`` carries
    all the time dependence.
    """
    p = spec.plants[i]
    iface = spec.interfaces[i]
    v = consensus_input(graph, z_all, i, spec.weights[i])
    dxi = None
    if spec.kind is ControllerKind.STATE:
        u = interface_input(iface, state.x, state.z, v)
    elif spec.kind is ControllerKind.OUTPUT:
        xi = np.asarray(state.xi, dtype=float).reshape(-1)
        u = interface_input(iface, xi, state.z, v)
        y = p.output(state.x)
        l_gain = spec.observer_gains[i][:, 0]
        dxi = p.A @ xi + p.b[:, 0] * u - l_gain * (y - p.output(xi))
    else:
        y = p.output(state.x)
        u = spec.static_gain(i) * (y - state.z) + iface.U * state.z + iface.R * v
    return u, v, dxi
