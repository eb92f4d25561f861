"""Pure-NumPy twin of the compiled RK4 kernel."""

import numpy as np


def rk4_linear(M, s0, h, nsteps):
    """Return the ``(nsteps + 1, d)`` array of RK4 iterates of ``ds/dt = M s``."""
    M = np.ascontiguousarray(M, dtype=float)
    s = np.array(s0, dtype=float)
    out = np.empty((nsteps + 1, s.size))
    out[0] = s
    half = 0.5 * h
    sixth = h / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nsteps):
            k1 = M @ s
            k2 = M @ (s + half * k1)
            k3 = M @ (s + half * k2)
            k4 = M @ (s + h * k3)
            s = s + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(s)):
                raise FloatingPointError(f"non-finite state at step {k + 1}")
            out[k + 1] = s
    return out
