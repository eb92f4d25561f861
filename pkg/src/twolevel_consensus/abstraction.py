"""Integrator abstraction of a SISO agent.

Each agent tracks a virtual single integrator ``dz/dt = v`` through the
interface ``u = k (x - X z) + U z + R v``.  The tracking quality is certified
by the quadratic simulation function ``V = c_hat * xbar' P xbar`` with
``xbar = x - X z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .plant import (
    Plant,
    check_minimal,
    default_state_poles,
    place_poles,
    solve_lyapunov,
    solve_regulator,
)
from .errors import Uncontrollable

__all__ = [
    "Interface",
    "SimCertificate",
    "build_interface",
    "build_certificate",
    "static_output_interface",
    "observer_interface",
    "simulation_value",
    "interface_input",
    "tracking_bound",
    "verify_decrease",
]


@dataclass(frozen=True, eq=False)
class Interface:
    plant: Plant
    X: np.ndarray  # n x 1
    U: float
    k: np.ndarray  # 1 x n
    R: float
    poles: np.ndarray = field(default=None, repr=False)

    @property
    def closed_loop(self) -> np.ndarray:
        return self.plant.A + self.plant.b @ self.k

    def residuals(self) -> tuple[float, float]:
        """``(||A X + b U||, |c X - 1|)``."""
        p = self.plant
        return (
            float(np.linalg.norm(p.A @ self.X + p.b * self.U)),
            float(abs((p.c @ self.X).item() - 1.0)),
        )


@dataclass(frozen=True, eq=False)
class SimCertificate:
    """Quadratic simulation function plus its linear and quadratic comparison functions.

    ``alpha(s) = alpha_rate * s`` and ``gamma(s) = gamma_coeff * s**2``.
    """

    P: np.ndarray
    c_hat: float
    alpha_rate: float
    gamma_coeff: float

    def lyapunov_residual(self, A_cl: np.ndarray) -> float:
        n = self.P.shape[0]
        return float(np.linalg.norm(A_cl.T @ self.P + self.P @ A_cl + np.eye(n)))


def build_interface(p: Plant, poles=None, R_override: float | None = None) -> Interface:
    controllable, _ = check_minimal(p)
    if not controllable:
        raise Uncontrollable(f"plant {p.name!r} is not controllable")
    X, U = solve_regulator(p)
    poles = default_state_poles(p.n) if poles is None else np.asarray(poles, dtype=complex)
    k = place_poles(p.A, p.b, poles)
    if R_override is None:
        # least-squares minimiser of ||b R - X||
        R = float((p.b.T @ X).item() / (p.b.T @ p.b).item())
    else:
        R = float(R_override)
    return Interface(p, X, U, k, R, np.asarray(poles))


def build_certificate(iface: Interface) -> SimCertificate:
    p = iface.plant
    P = solve_lyapunov(iface.closed_loop)
    eig = np.linalg.eigvalsh(P)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    c_hat = float(np.sum(p.c**2)) / lam_min
    drift = P @ (p.b * iface.R - iface.X)
    # the cross term of dV/dt carries c_hat, so gamma does too
    gamma_coeff = 16.0 * c_hat * lam_max * float(np.sum(drift**2))
    return SimCertificate(P, c_hat, 1.0 / (2.0 * lam_max), gamma_coeff)


def static_output_interface(iface: Interface, k_static: float) -> Interface:
    """The interface with ``k = k_static * c``, i.e. ``u = k_static (y - z) + U z + R v``."""
    return replace(iface, k=k_static * iface.plant.c, poles=None)


def observer_interface(iface: Interface, l_gain) -> Interface:
    """Observer-based law seen as an interface of the plant augmented with its observer.

    The augmented state is ``(x, xi)``; the input enters both blocks, the
    output is ``c x`` and the gain acts on ``xi`` only.  ``(X, X)`` and ``U``
    solve the augmented regulator equations, so the construction of
    :func:`build_certificate` applies unchanged.
    """
    p = iface.plant
    n = p.n
    lc = np.asarray(l_gain, dtype=float).reshape(n, 1) @ p.c
    A_aug = np.block([[p.A, np.zeros((n, n))], [-lc, p.A + lc]])
    aug = Plant(A_aug, np.vstack([p.b, p.b]), np.hstack([p.c, np.zeros((1, n))]), name=f"{p.name}+observer")
    return Interface(aug, np.vstack([iface.X, iface.X]), iface.U, np.hstack([np.zeros((1, n)), iface.k]), iface.R)


def simulation_value(cert: SimCertificate, iface: Interface, z, x) -> np.ndarray | float:
    """``c_hat * (x - X z)' P (x - X z)``; vectorised over leading axes.

    ``z`` has shape ``(...)`` and ``x`` shape ``(..., n)``.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    xbar = x - z[..., None] * iface.X[:, 0]
    val = cert.c_hat * np.einsum("...i,ij,...j->...", xbar, cert.P, xbar)
    return float(val) if val.ndim == 0 else val


def interface_input(iface: Interface, xhat, z: float, v: float) -> float:
    xhat = np.asarray(xhat, dtype=float).reshape(-1)
    return float(iface.k[0] @ (xhat - iface.X[:, 0] * z)) + iface.U * z + iface.R * v


def tracking_bound(cert: SimCertificate, V0, t, v_sup):
    """Explicit comparison bound on ``(y - z)**2``: ``V0 exp(-alpha t) + gamma(v_sup)``."""
    return V0 * np.exp(-cert.alpha_rate * np.asarray(t)) + cert.gamma_coeff * np.asarray(v_sup) ** 2


def verify_decrease(cert: SimCertificate, iface: Interface, z, x, v, dt: float) -> bool:
    """Check the decrease condition on equally spaced samples.

    Wherever ``gamma(|v|) < V`` the forward difference of ``V`` must satisfy
    ``dV/dt < -alpha V + 1e-6 + 10 dt``.  A test oracle, not a runtime gate.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    V = simulation_value(cert, iface, z, x)
    V = np.atleast_1d(V)
    if V.size < 2:
        return True
    slack = 1e-6 + 10.0 * dt
    dV = np.diff(V) / dt
    active = cert.gamma_coeff * v[:-1] ** 2 < V[:-1]
    ok = dV < -cert.alpha_rate * V[:-1] + slack
    return bool(np.all(ok | ~active))
