"""Numerical checks of conic flow comparison.

For two dynamics ``g <=_K h`` (one of them K-quasimonotone) and ordered
initial states ``x0 <=_K y0``, the flows stay ordered. These helpers
integrate both sides on a common grid and measure how far the difference
falls outside the cone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cone import ConvexCone
from .dynamics import ControlledSystem, Reduction
from .flow import ControlPath, Trajectory, integrate, reduce_path

TRAJ_TOL = 1e-6


@dataclass
class ComparisonReport:
    checked_times: int
    max_defect: float
    traj_tol: float
    violations: list = field(default_factory=list)
    times: np.ndarray | None = None
    defects: np.ndarray | None = None
    blew_up: bool = False
    lower: Trajectory | None = None
    upper: Trajectory | None = None

    @property
    def passed(self) -> bool:
        return not self.blew_up and not self.violations

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"[{status}] flow comparison: {len(self.violations)}/{self.checked_times} "
                 f"times violate the order; max_defect={self.max_defect:.3e} "
                 f"(tolerance {self.traj_tol:.3e})"]
        if self.blew_up:
            lines.append("  a trajectory blew up before the horizon; results are partial")
        for t, vec, mag in self.violations[:5]:
            lines.append(f"  t={t:.6g} defect={mag:.3e} difference={np.array2string(vec, precision=6)}")
        return "\n".join(lines)

    def defects_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "defect"])
            for t, d in zip(self.times, self.defects):
                w.writerow([repr(float(t)), repr(float(d))])


def _compare(lower: Trajectory, upper: Trajectory, cone: ConvexCone,
             traj_tol: float) -> ComparisonReport:
    k = min(len(lower.times), len(upper.times))
    diff = upper.states[:k] - lower.states[:k]
    defects = cone.defect(diff)
    scale = 1.0 + max(np.max(np.abs(lower.states[:k])), np.max(np.abs(upper.states[:k])))
    tol = traj_tol * scale
    times = lower.times[:k]
    bad = np.flatnonzero(defects > tol)
    violations = [(float(times[i]), diff[i], float(defects[i])) for i in bad]
    return ComparisonReport(checked_times=k, max_defect=float(defects.max()), traj_tol=tol,
                            violations=violations, times=times, defects=defects,
                            blew_up=lower.blew_up or upper.blew_up, lower=lower, upper=upper)


def compare_flows(sys_g: ControlledSystem, sys_h: ControlledSystem, cone: ConvexCone,
                  x0, y0, u: ControlPath, dt: float, T: float | None = None,
                  traj_tol: float = TRAJ_TOL) -> ComparisonReport:
    """Check ``Psi_g(t, x0) <=_K Psi_h(t, y0)`` at every integration step.

    Both systems are driven by the same control path ``u``.
    """
    if not cone.leq(x0, y0):
        raise ValueError("initial states are not ordered: x0 <=_K y0 fails")
    lower = integrate(sys_g, x0, u, dt, T)
    upper = integrate(sys_h, y0, u, dt, T)
    return _compare(lower, upper, cone, traj_tol)


def compare_controlled(sys: ControlledSystem, cone: ConvexCone, red: Reduction, x0, y0,
                       u: ControlPath, dt: float, T: float | None = None,
                       traj_tol: float = TRAJ_TOL) -> ComparisonReport:
    """Compare ``Psi(t; f, x0, u)`` with ``Psi(t; f, y0, phi(u))``."""
    if not cone.leq(x0, y0):
        raise ValueError("initial states are not ordered: x0 <=_K y0 fails")
    lower = integrate(sys, x0, u, dt, T)
    upper = integrate(sys, y0, reduce_path(u, red, sys), dt, T)
    return _compare(lower, upper, cone, traj_tol)


@dataclass
class EpsilonDiagnostic:
    base: Trajectory
    trajectories: list
    eps: np.ndarray
    gaps: np.ndarray

    @property
    def converging(self) -> bool:
        """Sup-norm gaps shrink strictly along the (decreasing) eps list."""
        return bool(np.all(np.diff(self.gaps) < 0)) if len(self.gaps) > 1 else True


def epsilon_diagnostic(sys_h: ControlledSystem, cone: ConvexCone, v, eps_list, x0,
                       u: ControlPath, dt: float, T: float | None = None) -> EpsilonDiagnostic:
    """Integrate ``x' = h(x, t) + eps v`` from ``x0 + eps v`` for each eps.

    ``v`` must be an interior point of the cone. The result holds the
    perturbed trajectories (in the order of ``eps_list``), the unperturbed
    one and the sup-norm gap of each perturbed trajectory to it.
    """
    v = np.asarray(v, dtype=float)
    if not cone.strictly_less(np.zeros_like(v), v):
        raise ValueError("perturbation direction v must lie in the interior of the cone")
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps < 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be nonnegative and strictly decreasing")
    x0 = np.asarray(x0, dtype=float)
    base = integrate(sys_h, x0, u, dt, T)
    runs, gaps = [], []
    for e in eps:
        tr = integrate(sys_h, x0 + e * v, u, dt, T, extra=e * v)
        runs.append(tr)
        k = min(len(tr.states), len(base.states))
        gaps.append(float(np.max(np.abs(tr.states[:k] - base.states[:k]))))
    return EpsilonDiagnostic(base, runs, eps, np.asarray(gaps))
