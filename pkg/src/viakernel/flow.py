"""Fixed-step RK4 integration under piecewise-constant control paths."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import ControlledSystem, Reduction, check_reduction_maps_into

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Control values held constant on each interval ``[t_k, t_{k+1})``."""

    t_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("control path needs at least one interval")
        if len(v) != len(t) - 1:
            raise ValueError(f"{len(t) - 1} intervals but {len(v)} control values")
        steps = np.diff(t)
        if t[0] != 0.0 or np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("control grid must start at 0 and be uniform and increasing")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, T: float) -> "ControlPath":
        v = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, T, len(v) + 1), v)

    @classmethod
    def constant(cls, value, T: float, intervals: int = 1) -> "ControlPath":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls.from_values(np.tile(v, (intervals, 1)), T)

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    @property
    def spacing(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    def __len__(self) -> int:
        return len(self.values)

    def at(self, t: float) -> np.ndarray:
        k = min(int(np.searchsorted(self.t_grid, t, side="right")) - 1, len(self.values) - 1)
        return self.values[max(k, 0)]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    blew_up: bool = False
    blow_up_time: float | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.states)))

    def to_csv(self, path) -> None:
        path = Path(path)
        n = self.states.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
            for t, x in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:])


def rk4_step(f, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step; ``x`` and ``u`` may be batched."""
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def substeps(spacing: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("time step must be positive")
    ratio = spacing / dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"dt={dt} does not divide the control spacing {spacing}")
    return k


def integrate(sys: ControlledSystem, x0, u: ControlPath, dt: float, T: float | None = None,
              overflow_guard: float = OVERFLOW_GUARD, extra=None) -> Trajectory:
    """Integrate ``x' = f(x, u(t))`` from ``x0`` with fixed RK4 steps.

    ``T`` truncates the horizon (it must fall on the step grid); ``extra`` is
    an optional constant vector added to the vector field.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.n,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({sys.n},)")
    if not sys.state_domain(x):
        raise ValueError(f"initial state {x} is outside the state domain")
    k = substeps(u.spacing, dt)
    f = sys.f if extra is None else (lambda z, v, _e=np.asarray(extra, float): sys.f(z, v) + _e)
    total = len(u) * k
    if T is not None:
        total = int(round(T / dt))
        if total < 1 or total > len(u) * k + 1e-9 or abs(total * dt - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"horizon T={T} is not a multiple of dt within the path")
    times = dt * np.arange(total + 1)
    states = np.empty((total + 1, sys.n))
    states[0] = x
    for step in range(total):
        x = rk4_step(f, x, u.values[step // k], dt)
        states[step + 1] = x
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > overflow_guard:
            return Trajectory(times[: step + 2], states[: step + 2], True, float(times[step + 1]))
    return Trajectory(times, states)


def reduce_path(u: ControlPath, red: Reduction, sys: ControlledSystem | None = None) -> ControlPath:
    """The path ``t -> phi(u(t))`` on the same grid.

    When ``sys`` is given the image is checked against its control set.
    """
    if sys is not None:
        check_reduction_maps_into(sys, red, u.values)
    return ControlPath(u.t_grid, red(u.values))
