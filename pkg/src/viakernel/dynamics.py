"""Controlled dynamics and sampled verification of the monotonicity hypotheses.

All conditions checked here are universally quantified statements about
``f``. They are verified by sampled falsification: a passing
:class:`Report` means no counterexample was found on the sampling plan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .cone import ConvexCone

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


# -- control sets ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError(f"invalid control box [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def m(self) -> int:
        return self.lower.size

    def contains(self, u, tol: float = 1e-12):
        u = np.asarray(u, dtype=float)
        out = np.all((u >= self.lower - tol) & (u <= self.upper + tol), axis=-1)
        return bool(out) if out.ndim == 0 else out

    def scale(self, unit: np.ndarray) -> np.ndarray:
        return self.lower + unit * (self.upper - self.lower)


@dataclass(frozen=True, eq=False)
class Finite:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("finite control set needs at least one control vector")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def contains(self, u, tol: float = 1e-12):
        u = np.asarray(u, dtype=float)
        close = np.all(np.abs(u[..., None, :] - self.points) <= tol, axis=-1)
        out = np.any(close, axis=-1)
        return bool(out) if out.ndim == 0 else out


def nonnegative(x) -> np.ndarray | bool:
    out = np.all(np.asarray(x) >= 0.0, axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


def everywhere(x) -> np.ndarray | bool:
    out = np.ones(np.shape(x)[:-1], dtype=bool)
    return bool(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ControlledSystem:
    """``x' = f(x, u)`` with ``x`` in R^n and ``u`` in a control set of R^m.

    ``f`` must broadcast over leading axes: given ``x`` of shape ``(..., n)``
    and ``u`` of shape ``(..., m)`` it returns shape ``(..., n)``.
    """

    n: int
    m: int
    f: Evaluator
    control_set: Box | Finite
    state_domain: Callable = nonnegative
    name: str = "system"

    def __call__(self, x, u) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float), np.asarray(u, dtype=float))


@dataclass(frozen=True, eq=False)
class Reduction:
    """A control-space self map ``phi``, vectorized over leading axes."""

    phi: Callable[[np.ndarray], np.ndarray]
    name: str = "phi"

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.phi(np.asarray(u, dtype=float)), dtype=float)

    @classmethod
    def identity(cls) -> "Reduction":
        return cls(lambda u: u.copy(), name="identity")

    @classmethod
    def constant(cls, value) -> "Reduction":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(lambda u: np.broadcast_to(v, u.shape).copy(), name=f"constant{v.tolist()}")


def check_reduction_maps_into(sys: ControlledSystem, red: Reduction, u) -> None:
    image = red(u)
    ok = sys.control_set.contains(image)
    if not np.all(ok):
        bad = np.asarray(u)[~np.asarray(ok)] if np.ndim(ok) else np.asarray(u)
        raise ValueError(f"reduction {red.name} maps {bad[0] if bad.ndim > 1 else bad} "
                         "outside the control set")


# -- sampling ---------------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """Quasi-random points over a state box times the control set."""

    state_lower: tuple
    state_upper: tuple
    n_samples: int = 10_000
    seed: int = 0

    def points(self, sys: ControlledSystem) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.state_lower, dtype=float)
        hi = np.asarray(self.state_upper, dtype=float)
        if lo.shape != (sys.n,) or hi.shape != (sys.n,):
            raise ValueError("sampling box does not match the state dimension")
        cs = sys.control_set
        d = sys.n + (cs.m if isinstance(cs, Box) else 0)
        unit = qmc.Halton(d=d, scramble=True, seed=self.seed).random(self.n_samples)
        x = lo + unit[:, : sys.n] * (hi - lo)
        if isinstance(cs, Box):
            u = cs.scale(unit[:, sys.n:])
        else:
            rng = np.random.default_rng(self.seed)
            u = cs.points[rng.integers(len(cs.points), size=self.n_samples)]
        return x, u

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


# -- reports ---------------------------------------------------------------

@dataclass
class Report:
    """Pass/fail tally of a sampled check with the worst witness found.

    ``worst_margin`` is the smallest value of (tested quantity + tolerance);
    the check fails exactly when it is negative somewhere.
    """

    name: str
    checked: int = 0
    failed: int = 0
    worst_margin: float = np.inf
    witness: dict | None = None
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failed == 0

    def merge(self, other: "Report") -> "Report":
        better = self if self.worst_margin <= other.worst_margin else other
        return Report(self.name, self.checked + other.checked, self.failed + other.failed,
                      better.worst_margin, better.witness, self.details + other.details)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"[{status}] {self.name}: {self.failed}/{self.checked} violations"
        if self.witness is not None and not self.passed:
            parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
            line += f"; worst: {parts}"
        return line


def _fmt(v) -> str:
    if isinstance(v, np.ndarray):
        return np.array2string(v, precision=6, separator=",")
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# -- jacobians -------------------------------------------------------------

def default_step(x) -> np.ndarray:
    return 1e-5 * (1.0 + np.max(np.abs(x), axis=-1))


def jacobian_fd(sys: ControlledSystem, x, u, h=None) -> np.ndarray:
    """Central-difference Jacobian of ``f`` in ``x``.

    Accepts a single point or a batch of shape ``(N, n)``; the result has
    shape ``(..., n, n)`` with entry ``[i, j] = d f_i / d x_j``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    U = np.broadcast_to(np.atleast_2d(u), (X.shape[0], sys.m))
    hh = default_step(X) if h is None else np.broadcast_to(np.asarray(h, dtype=float), X.shape[:1])
    if np.any(hh <= 0):
        raise ValueError("finite-difference step must be positive")
    J = np.empty((X.shape[0], sys.n, sys.n))
    for j in range(sys.n):
        e = np.zeros(sys.n)
        e[j] = 1.0
        with np.errstate(all="raise"):
            try:
                fp = sys.f(X + hh[:, None] * e, U)
                fm = sys.f(X - hh[:, None] * e, U)
            except (FloatingPointError, ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"evaluation failed while perturbing coordinate {j}: {exc}") from exc
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError(f"non-finite value while perturbing coordinate {j}")
        J[:, :, j] = (fp - fm) / (2.0 * hh[:, None])
    return J[0] if single else J


# -- quasimonotonicity checks ---------------------------------------------

def check_orthant_quasimonotone(sys: ControlledSystem, cone: ConvexCone, samples: SamplingPlan,
                                tol_grad: float = 1e-7) -> Report:
    """Off-diagonal sign test ``s_i s_j df_i/dx_j >= 0`` for an orthant cone."""
    if cone.kind != "orthant" or cone.n != sys.n:
        raise ValueError("orthant test needs an orthant cone of matching dimension")
    x, u = samples.points(sys)
    J = jacobian_fd(sys, x, u)
    signed = J * np.outer(cone.signs, cone.signs)
    margin = signed + tol_grad * (1.0 + np.abs(J))
    off = ~np.eye(sys.n, dtype=bool)
    margin = np.where(off, margin, np.inf)
    bad = margin < 0
    rep = Report("orthant quasimonotonicity", checked=len(x),
                 failed=int(np.any(bad, axis=(1, 2)).sum()))
    k, i, j = np.unravel_index(np.argmin(margin), margin.shape)
    rep.worst_margin = float(margin[k, i, j])
    rep.witness = {"x": x[k], "u": u[k], "i": int(i), "j": int(j), "value": float(J[k, i, j])}
    return rep


def check_general_quasimonotone(sys: ControlledSystem, cone: ConvexCone, samples: SamplingPlan,
                                tol_grad: float = 1e-7, rel_step: float = 1e-3) -> Report:
    """Dual-cone test: for each dual generator ``y`` and pairs ``x' = x + d``
    with ``d`` in ``K ∩ {y}^⊥``, require ``<f(x') - f(x), y> >= 0``.

    The displacements are the face generators scaled by
    ``rel_step * (1 + |x|_inf)`` plus one random nonnegative combination of
    them; a displacement is halved until ``x'`` lies in the state domain.
    """
    if cone.n != sys.n:
        raise ValueError("cone and system dimensions differ")
    duals = cone.dual_generators()
    if len(duals) == 0:
        raise ValueError("cone provides no dual generators")
    x, u = samples.points(sys)
    rng = samples.rng()
    fx = sys.f(x, u)
    step = rel_step * (1.0 + np.max(np.abs(x), axis=1))
    rep = Report("general quasimonotonicity")
    rep.witness = None
    pairs = 0
    failed_rows = np.zeros(len(x), dtype=bool)
    for y in duals:
        face = cone.face_generators(y)
        if len(face) == 0:
            continue
        dirs = list(face)
        w = rng.random((len(x), len(face)))
        combos = w @ face
        norms = np.linalg.norm(combos, axis=1, keepdims=True)
        combos = np.where(norms > 0, combos / np.where(norms > 0, norms, 1.0), 0.0)
        for d in dirs + [combos]:
            d = np.broadcast_to(d, x.shape)
            scale = step.copy()
            xp = x + scale[:, None] * d
            inside = np.asarray(sys.state_domain(xp))
            for _ in range(30):
                if inside.all():
                    break
                scale = np.where(inside, scale, scale / 2)
                xp = x + scale[:, None] * d
                inside = np.asarray(sys.state_domain(xp))
            valid = inside & np.any(d != 0, axis=1)
            fxp = sys.f(xp, u)
            gain = (fxp - fx) @ y
            mag = np.abs(fx @ y) + np.abs(fxp @ y)
            margin = np.where(valid, gain + tol_grad * (1.0 + mag), np.inf)
            pairs += int(valid.sum())
            failed_rows |= margin < 0
            k = int(np.argmin(margin))
            if margin[k] < rep.worst_margin:
                rep.worst_margin = float(margin[k])
                rep.witness = {"x": x[k], "u": u[k], "y": y, "d": scale[k] * d[k],
                               "value": float(gain[k])}
    rep.checked = pairs
    rep.failed = int(failed_rows.sum())
    return rep


def check_reduction(sys: ControlledSystem, cone: ConvexCone, red: Reduction,
                    samples: SamplingPlan) -> Report:
    """``f(x, u) <=_K f(x, phi(u))`` on sampled ``(x, u)``.

    Raises ``ValueError`` when ``phi`` leaves the control set.
    """
    x, u = samples.points(sys)
    check_reduction_maps_into(sys, red, u)
    diff = sys.f(x, red(u)) - sys.f(x, u)
    margin = cone.slack(diff).min(axis=-1) + cone.tol
    ok = margin >= 0
    k = int(np.argmin(margin))
    return Report(f"K-reduction ({red.name})", checked=len(x), failed=int((~ok).sum()),
                  worst_margin=float(margin[k]),
                  witness={"x": x[k], "u": u[k], "difference": diff[k]})


def lipschitz_estimate(sys: ControlledSystem, samples: SamplingPlan, radius: float = 1e-2) -> float:
    """Largest ratio ``|f(x,u) - f(x',u)| / |x - x'|`` over sampled nearby pairs.

    A diagnostic for the local Lipschitz assumption, not a certificate.
    """
    x, u = samples.points(sys)
    rng = samples.rng()
    dx = rng.normal(size=x.shape)
    dx *= (radius * (1.0 + np.max(np.abs(x), axis=1)) / np.linalg.norm(dx, axis=1))[:, None]
    xp = x + dx
    ok = np.asarray(sys.state_domain(xp))
    ratio = np.linalg.norm(sys.f(xp, u) - sys.f(x, u), axis=1) / np.linalg.norm(dx, axis=1)
    return float(np.max(ratio[ok])) if ok.any() else float("nan")
