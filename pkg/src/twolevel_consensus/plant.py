"""Single-input single-output agent models and the linear-algebra kernels
used by the synthesis: rank tests, regulator equations, pole placement and
the continuous-time Lyapunov equation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotHurwitz, SingularSystem, Uncontrollable, Unobservable

__all__ = [
    "Plant",
    "ValidationReport",
    "check_minimal",
    "check_no_origin_zero",
    "validate_plant",
    "solve_regulator",
    "place_poles",
    "observer_gain",
    "solve_lyapunov",
    "default_state_poles",
    "default_observer_poles",
    "numerical_rank",
]

RANK_RTOL = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got {arr.ndim}-d data")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Plant:
    """Agent ``dx/dt = A x + b u``, ``y = c x`` with scalar input and output.

    ``b`` is stored as an ``n x 1`` column and ``c`` as a ``1 x n`` row;
    flat sequences of length ``n`` are accepted for either.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        b = _as_matrix(np.reshape(self.b, (-1, 1)) if np.ndim(self.b) == 1 else self.b, "b")
        c = _as_matrix(np.reshape(self.c, (1, -1)) if np.ndim(self.c) == 1 else self.c, "c")
        if b.shape != (n, 1):
            raise DimensionMismatch(f"b must be {n}x1 (single input), got {b.shape}")
        if c.shape != (1, n):
            raise DimensionMismatch(f"c must be 1x{n} (single output), got {c.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def output(self, x) -> float:
        return float(self.c[0] @ np.asarray(x, dtype=float).reshape(-1))

    def __eq__(self, other):
        return (
            isinstance(other, Plant)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes(), self.c.tobytes()))


@dataclass
class ValidationReport:
    controllable: bool
    observable: bool
    no_origin_zero: bool
    messages: list[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.controllable and self.observable and self.no_origin_zero


def numerical_rank(M: np.ndarray) -> int:
    """Rank with singular values below ``RANK_RTOL * s_max`` counted as zero."""
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def controllability_matrix(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    cols = [b.reshape(-1, 1)]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def observability_matrix(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    return controllability_matrix(A.T, c.reshape(1, -1).T).T


def check_minimal(p: Plant) -> tuple[bool, bool]:
    """Return ``(controllable, observable)`` by Kalman rank tests."""
    controllable = numerical_rank(controllability_matrix(p.A, p.b)) == p.n
    observable = numerical_rank(observability_matrix(p.A, p.c)) == p.n
    return controllable, observable


def _rosenbrock_at_origin(p: Plant) -> np.ndarray:
    return np.block([[p.A, p.b], [p.c, np.zeros((1, 1))]])


def check_no_origin_zero(p: Plant) -> bool:
    return numerical_rank(_rosenbrock_at_origin(p)) == p.n + 1


def validate_plant(p: Plant) -> ValidationReport:
    controllable, observable = check_minimal(p)
    no_zero = check_no_origin_zero(p)
    msgs = []
    if not controllable:
        msgs.append("(A, b) is not controllable")
    if not observable:
        msgs.append("(c, A) is not observable")
    if not no_zero:
        msgs.append("[[A, b], [c, 0]] is rank deficient: transmission zero at the origin")
    return ValidationReport(controllable, observable, no_zero, msgs)


def solve_regulator(p: Plant) -> tuple[np.ndarray, float]:
    """Solve ``A X + b U = 0``, ``c X = 1`` for the column ``X`` and scalar ``U``."""
    if not check_no_origin_zero(p):
        raise SingularSystem(
            "regulator equations A X + b U = 0, c X = 1 are not solvable: "
            "the plant has a transmission zero at the origin"
        )
    rhs = np.zeros(p.n + 1)
    rhs[-1] = 1.0
    sol = np.linalg.solve(_rosenbrock_at_origin(p), rhs)
    return sol[:-1].reshape(-1, 1), float(sol[-1])


def _validated_poles(poles, n: int) -> np.ndarray:
    poles = np.atleast_1d(np.asarray(poles, dtype=complex))
    if poles.shape != (n,):
        raise ValueError(f"need exactly {n} poles, got {poles.size}")
    if np.any(poles.real >= 0):
        raise ValueError(f"all requested poles must have negative real part, got {poles}")
    a = np.sort_complex(poles)
    b = np.sort_complex(poles.conj())
    if not np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.abs(poles).max())):
        raise ValueError("pole list must be closed under complex conjugation")
    return poles


def default_state_poles(n: int) -> np.ndarray:
    return -np.arange(1, n + 1, dtype=float)


def default_observer_poles(n: int) -> np.ndarray:
    return -2.0 * np.arange(1, n + 1, dtype=float)


def place_poles(A, b, poles) -> np.ndarray:
    """Row gain ``k`` such that ``A + b k`` has the requested spectrum.

    Ackermann's formula, with the sign flipped so that feedback enters as
    ``+ b k``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    b = np.asarray(b, dtype=float).reshape(n, 1)
    poles = _validated_poles(poles, n)
    ctrb = controllability_matrix(A, b)
    if numerical_rank(ctrb) < n:
        raise Uncontrollable("(A, b) fails the controllability rank test")
    coeffs = np.real(np.poly(poles))
    phi = np.zeros_like(A)
    for a in coeffs:
        phi = phi @ A + a * np.eye(n)
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    q = np.linalg.solve(ctrb.T, e_last)
    return -(q @ phi).reshape(1, n)


def observer_gain(A, c, poles) -> np.ndarray:
    """Column gain ``l`` such that ``A + l c`` has the requested spectrum."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = np.asarray(c, dtype=float).reshape(1, n)
    try:
        k = place_poles(A.T, c.T, poles)
    except Uncontrollable:
        raise Unobservable("(c, A) fails the observability rank test") from None
    return k.T


def is_hurwitz(M: np.ndarray) -> bool:
    return bool(np.max(np.linalg.eigvals(M).real) < 0)


def solve_lyapunov(A_cl) -> np.ndarray:
    """Symmetric ``P`` with ``A_cl^T P + P A_cl = -I``.

    Solved as the Kronecker-vectorized linear system; intended for the small
    state dimensions of individual agents.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    n = A_cl.shape[0]
    if not is_hurwitz(A_cl):
        raise NotHurwitz("Lyapunov equation needs a Hurwitz matrix")
    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
    K = np.kron(eye, A_cl.T) + np.kron(A_cl.T, eye)
    vecP = np.linalg.solve(K, -eye.reshape(-1, order="F"))
    P = vecP.reshape(n, n, order="F")
    return 0.5 * (P + P.T)
