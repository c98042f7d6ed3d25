"""Small test systems shared by several test modules."""

import numpy as np

from viakernel.dynamics import Box, ControlledSystem, Finite, everywhere, nonnegative

METZLER = np.array([[-1.0, 1.0], [1.0, -1.0]])


def linear(A, B=None, controls=None, domain=everywhere, name="linear"):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = np.zeros((n, 1)) if B is None else np.asarray(B, dtype=float).reshape(n, -1)
    cs = Box([-1.0] * B.shape[1], [1.0] * B.shape[1]) if controls is None else controls
    return ControlledSystem(n, B.shape[1], lambda x, u: x @ A.T + u @ B.T, cs, domain, name)


def from_callable(n, m, f, controls=None, domain=everywhere, name="custom"):
    cs = Box([-1.0] * m, [1.0] * m) if controls is None else controls
    return ControlledSystem(n, m, f, cs, domain, name)


def integrator(controls=(-1.0, 0.0, 1.0)):
    cs = Finite([[c] for c in controls])
    return ControlledSystem(1, 1, lambda x, u: np.broadcast_to(u, x.shape).copy(), cs,
                            everywhere, "integrator")


def decay(controls=(0.0, 0.5, 1.0)):
    cs = Finite([[c] for c in controls])
    return ControlledSystem(1, 1, lambda x, u: -x + u, cs, everywhere, "decay")


def separable(A, Bs, C):
    """``f_i = sum_j A_ij x_j + Bs_ij sin(x_j) + C_i u`` (scalar control)."""
    A, Bs, C = (np.asarray(v, dtype=float) for v in (A, Bs, C))
    return ControlledSystem(A.shape[0], 1,
                            lambda x, u: x @ A.T + np.sin(x) @ Bs.T + u * C,
                            Box([-1.0], [1.0]), everywhere, "separable")


def random_separable(rng, signs, p_bad=0.1):
    """Random separable system built around an orthant sign pattern.

    Each off-diagonal coupling is, with probability ``1 - p_bad``, of the
    sign required by ``signs`` with margin; otherwise it either has the
    wrong sign everywhere or oscillates through zero in ``x_j``.
    """
    s = np.asarray(signs, dtype=float)
    n = s.size
    want = np.outer(s, s)
    off = ~np.eye(n, dtype=bool)
    amp = rng.uniform(0.1, 0.4, size=(n, n)) * np.sign(rng.normal(size=(n, n)))
    A = want * (np.abs(rng.normal(size=(n, n))) + 0.5)
    Bs = amp.copy()
    bad = off & (rng.random((n, n)) < p_bad)
    wrong = bad & (rng.random((n, n)) < 0.5)
    osc = bad & ~wrong
    A[wrong] = -A[wrong]
    Bs[osc] = (np.abs(A) + 0.5)[osc] * np.sign(amp[osc])
    A[~off] = -np.abs(rng.normal(size=n)) - 1.0
    Bs[~off] = 0.0
    return separable(A, Bs, rng.normal(size=n))


def positive_on(x):
    return nonnegative(x)


def dense_viability_oracle(rhs, x0, controls, lower, upper, T=30.0, samples=3001):
    """Scalar states that stay in ``[lower, upper]`` on ``[0, T]`` under some
    constant control, by adaptive integration and dense sampling."""
    from scipy.integrate import solve_ivp

    x0 = np.asarray(x0, dtype=float)
    ts = np.linspace(0.0, T, samples)
    ok = np.zeros(len(x0), dtype=bool)
    for u in controls:
        sol = solve_ivp(lambda t, x: rhs(x, u), (0.0, T), x0, t_eval=ts,
                        rtol=1e-10, atol=1e-12, vectorized=False)
        traj = sol.y
        ok |= np.all((traj >= lower - 1e-12) & (traj <= upper + 1e-12), axis=1)
    return ok
