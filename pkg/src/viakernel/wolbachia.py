"""Wolbachia biocontrol case study.

State ``x = (L_U, A_U, L_W, A_W)``: uninfected larvae and adults, then
Wolbachia-infected larvae and adults. The control ``u`` in ``[0, u_sharp]``
is the release rate of infected larvae.

Cytoplasmic incompatibility enters through the recruitment term
``alpha_U A_U^2 / (A_U + A_W)``, extended by 0 where ``A_U = A_W = 0``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np
from scipy.optimize import fsolve

from .cone import ConvexCone
from .dynamics import Box, ControlledSystem, Reduction, nonnegative
from .flow import ControlPath, integrate
from .viability import (DesirableSet, GridSpec, KernelGrid, boundary_layer, compute_kernel,
                        dilate, extend_desirable, kernel_inclusion, reduced_dynamics,
                        symmetric_difference)

WOLBACHIA_SIGNS = (-1, -1, 1, 1)


@dataclass(frozen=True)
class WolbachiaParams:
    alpha_U: float
    alpha_W: float
    nu: float
    mu: float
    k: float
    mu_U: float
    mu_W: float
    u_sharp: float

    def __post_init__(self):
        bad = [name for name, v in asdict(self).items() if not v > 0]
        if bad:
            raise ValueError(f"parameters must be positive: {', '.join(bad)}")


@dataclass(frozen=True)
class WolbachiaThresholds:
    """Upper bounds on uninfected and lower bounds on infected populations."""

    L_U_max: float
    A_U_max: float
    L_W_min: float
    A_W_min: float

    def __post_init__(self):
        bad = [name for name, v in asdict(self).items() if not v > 0]
        if bad:
            raise ValueError(f"thresholds must be positive: {', '.join(bad)}")

    def corner(self) -> np.ndarray:
        return np.array([self.L_U_max, self.A_U_max, self.L_W_min, self.A_W_min])


def _recruitment_ratio(A_U, A_W):
    total = A_U + A_W
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, A_U * A_U / safe, 0.0)


def _rhs(p: WolbachiaParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    L_U, A_U, L_W, A_W = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    crowd = p.mu * (1.0 + p.k * (L_U + L_W))
    F_L = p.alpha_U * _recruitment_ratio(A_U, A_W) - p.nu * L_U - crowd * L_U
    F_A = p.nu * L_U - p.mu_U * A_U
    G_L = p.alpha_W * A_W - p.nu * L_W - crowd * L_W
    G_A = p.nu * L_W - p.mu_W * A_W
    return np.stack([F_L, F_A, G_L + u[..., 0], G_A], axis=-1)


def wolbachia_f(p: WolbachiaParams, x, u) -> np.ndarray:
    """Vector field at nonnegative states and controls in ``[0, u_sharp]``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == x.ndim - 1:
        u = u[..., None]
    if np.any(x < 0):
        raise ValueError("Wolbachia state must be componentwise nonnegative")
    if np.any(u < 0) or np.any(u > p.u_sharp):
        raise ValueError(f"control must lie in [0, {p.u_sharp}]")
    return _rhs(p, x, u)


def wolbachia_system(p: WolbachiaParams) -> ControlledSystem:
    # no domain checks here: RK4 stages may graze the boundary of R^4_+
    return ControlledSystem(4, 1, lambda x, u: _rhs(p, x, u), Box([0.0], [p.u_sharp]),
                            nonnegative, name="wolbachia")


def wolbachia_reduction(p: WolbachiaParams) -> Reduction:
    red = Reduction.constant([p.u_sharp])
    return Reduction(red.phi, name="u_sharp")


def wolbachia_cone() -> ConvexCone:
    return ConvexCone.orthant(WOLBACHIA_SIGNS)


def wolbachia_desirable(p: WolbachiaParams, thr: WolbachiaThresholds) -> DesirableSet:
    """``(threshold corner + K) × [0, u_sharp]``.

    The nonnegativity of the state is carried by the system's state domain.
    """
    c = thr.corner()
    return DesirableSet([-np.inf, -np.inf, c[2], c[3]], [c[0], c[1], np.inf, np.inf],
                        [0.0], [p.u_sharp])


def desirable_predicate(p: WolbachiaParams, thr: WolbachiaThresholds):
    """The desirable set written out inequality by inequality."""
    def pred(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)[..., 0]
        return ((x[..., 0] <= thr.L_U_max) & (x[..., 1] <= thr.A_U_max)
                & (x[..., 2] >= thr.L_W_min) & (x[..., 3] >= thr.A_W_min)
                & (u >= 0) & (u <= p.u_sharp))
    return pred


# -- equilibria, presets and defaults ----------------------------------------

def wild_equilibrium(p: WolbachiaParams) -> np.ndarray:
    """Wolbachia-free equilibrium of the uncontrolled model."""
    growth = p.alpha_U * p.nu / p.mu_U - p.nu - p.mu
    if growth <= 0:
        return np.zeros(4)
    L = growth / (p.mu * p.k)
    return np.array([L, p.nu * L / p.mu_U, 0.0, 0.0])


def forced_equilibrium(p: WolbachiaParams, x0=None, horizon: float = 200.0,
                       dt: float = 0.01) -> np.ndarray:
    """Equilibrium reached under the constant maximal release ``u_sharp``.

    Integrates from ``x0`` (default: the wild equilibrium) and polishes the
    end state with a root solve.
    """
    sys = wolbachia_system(p)
    x0 = wild_equilibrium(p) if x0 is None else np.asarray(x0, float)
    tr = integrate(sys, x0, ControlPath.constant([p.u_sharp], horizon), dt)
    guess = tr.final
    u = np.array([p.u_sharp])
    root, info, ier, _ = fsolve(lambda z: _rhs(p, z, u), guess, full_output=True, xtol=1e-12)
    if ier != 1 or np.any(root < -1e-9) or np.linalg.norm(root - guess) > 1e-3 * (1 + np.abs(guess).max()):
        return guess
    return np.maximum(root, 0.0)


def jacobian(p: WolbachiaParams, x) -> np.ndarray:
    """Analytic Jacobian of the vector field (it does not depend on ``u``)."""
    L_U, A_U, L_W, A_W = np.asarray(x, dtype=float)
    S = A_U + A_W
    crowd = p.mu * (1 + p.k * (L_U + L_W))
    dr_dAU = (A_U * A_U + 2 * A_U * A_W) / S ** 2
    dr_dAW = -A_U * A_U / S ** 2
    return np.array([
        [-p.nu - crowd - p.mu * p.k * L_U, p.alpha_U * dr_dAU, -p.mu * p.k * L_U, p.alpha_U * dr_dAW],
        [p.nu, -p.mu_U, 0.0, 0.0],
        [-p.mu * p.k * L_W, 0.0, -p.nu - crowd - p.mu * p.k * L_W, p.alpha_W],
        [0.0, 0.0, p.nu, -p.mu_W],
    ])


def is_stable(p: WolbachiaParams, x) -> bool:
    return bool(np.all(np.linalg.eigvals(jacobian(p, x)).real < 0))


def default_thresholds(p: WolbachiaParams, infected_frac: float = 0.8,
                       uninfected_frac: float = 1.2, floor_frac: float = 0.9) -> WolbachiaThresholds:
    """Thresholds around the equilibrium forced by ``u_sharp``.

    Infected lower bounds are ``infected_frac`` of the forced equilibrium.
    Uninfected upper bounds are ``uninfected_frac`` of it, floored at
    ``floor_frac`` of the wild equilibrium because the forced equilibrium
    typically has no uninfected mosquitoes at all.
    """
    eq = forced_equilibrium(p)
    wild = wild_equilibrium(p)
    U = np.maximum(uninfected_frac * eq[:2], floor_frac * wild[:2])
    W = infected_frac * eq[2:]
    return WolbachiaThresholds(float(U[0]), float(U[1]), float(W[0]), float(W[1]))


def default_grid(p: WolbachiaParams, thr: WolbachiaThresholds, cells: int = 15,
                 margin: float = 1.1) -> GridSpec:
    """Window containing both equilibria, with absorbing faces at the state
    boundary (uninfected axes, lower side) and where the window truncates the
    kernel (infected axes, upper side)."""
    wild = wild_equilibrium(p)
    forced = forced_equilibrium(p)
    upper = margin * np.maximum.reduce([wild, forced, thr.corner()])
    return GridSpec((0.0,) * 4, tuple(float(v) for v in upper), (cells,) * 4,
                    absorbing=((0, "lower"), (1, "lower"), (2, "upper"), (3, "upper")))


def load_preset(name: str = "default") -> dict:
    text = resources.files("viakernel.presets").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def preset_case(name: str = "default"):
    """Parameters, thresholds and grid stored in a named preset."""
    data = load_preset(name)
    p = WolbachiaParams(**data["params"])
    thr = WolbachiaThresholds(**data["thresholds"])
    grid = GridSpec.from_spec(data["grid"])
    return p, thr, grid, data


def preset_conditions(p: WolbachiaParams) -> dict:
    """The two properties a preset must have, evaluated numerically."""
    wild = wild_equilibrium(p)
    forced = forced_equilibrium(p)
    return {
        "wild_equilibrium": wild.tolist(),
        "wild_stable": bool(wild[0] > 0 and is_stable(p, wild)),
        "forced_equilibrium": forced.tolist(),
        "wolbachia_dominant": bool(forced[3] > forced[1] and forced[2] > forced[0]),
    }


def search_preset(candidates) -> WolbachiaParams | None:
    """First candidate parameter set with a stable wild equilibrium and a
    Wolbachia-dominant state under maximal release."""
    for c in candidates:
        p = c if isinstance(c, WolbachiaParams) else WolbachiaParams(**c)
        cond = preset_conditions(p)
        if cond["wild_stable"] and cond["wolbachia_dominant"]:
            return p
    return None


# -- assembled case study ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CaseStudy:
    system: ControlledSystem
    desirable: DesirableSet
    cone: ConvexCone
    reduction: Reduction
    params: WolbachiaParams
    thresholds: WolbachiaThresholds


def build_case_study(p: WolbachiaParams, thr: WolbachiaThresholds) -> CaseStudy:
    return CaseStudy(wolbachia_system(p), wolbachia_desirable(p, thr), wolbachia_cone(),
                     wolbachia_reduction(p), p, thr)


def sharp_system(p: WolbachiaParams) -> ControlledSystem:
    """``f_sharp(x, u) = f(x, u_sharp)``."""
    sys = reduced_dynamics(wolbachia_system(p), wolbachia_reduction(p))
    return ControlledSystem(sys.n, sys.m, sys.f, sys.control_set, sys.state_domain,
                            name="wolbachia_sharp")


@dataclass
class CaseStudyReport:
    full: KernelGrid
    sharp: KernelGrid
    reduced: KernelGrid
    extended_equals_original: bool
    full_in_sharp: bool
    sharp_in_full: bool
    full_in_reduced: bool
    symdiff: int
    witnesses: list

    @property
    def symdiff_fraction(self) -> float:
        return self.symdiff / max(1, self.full.count)

    @property
    def symdiff_in_boundary_layer(self) -> bool:
        diff = self.full.mask ^ self.sharp.mask
        layer = dilate(boundary_layer(self.full) | boundary_layer(self.sharp), 1)
        return bool(np.all(~diff | layer))

    def summary(self) -> str:
        lines = [
            "Wolbachia case study",
            f"  grid shape {self.full.spec.shape}, window {self.full.spec.lower} -> "
            f"{tuple(round(v, 6) for v in self.full.spec.upper)}",
            f"  admissible cells (D): {self.full.meta['initial_cells']}",
            f"  V(f, D): {self.full.count} cells, {self.full.meta['iterations']} iterations",
            f"  V(f_sharp, D): {self.sharp.count} cells, {self.sharp.meta['iterations']} iterations",
            f"  V(f_phi, D_K): {self.reduced.count} cells",
            f"  D_K identical to D: {self.extended_equals_original}",
            f"  V(f,D) ⊆ V(f_phi,D_K): {self.full_in_reduced}",
            f"  V(f,D) ⊆ V(f_sharp,D): {self.full_in_sharp}",
            f"  V(f_sharp,D) ⊆ V(f,D): {self.sharp_in_full}",
            f"  |V(f,D) △ V(f_sharp,D)| = {self.symdiff} "
            f"({100 * self.symdiff_fraction:.3f}% of member cells)",
        ]
        return "\n".join(lines)


def compare_release_kernels(p: WolbachiaParams, thr: WolbachiaThresholds, grid: GridSpec,
                            controls=None, dt: float = 0.05, max_iter: int = 500,
                            threads: int = 1) -> CaseStudyReport:
    """Compute the kernels of the full and reduced problems and compare them."""
    case = build_case_study(p, thr)
    if controls is None:
        controls = [[0.0], [0.5 * p.u_sharp], [p.u_sharp]]
    full = compute_kernel(case.system, case.desirable, grid, controls, dt, max_iter, threads=threads)
    sharp = compute_kernel(sharp_system(p), case.desirable, grid, [[p.u_sharp]], dt, max_iter,
                           threads=threads)
    D_K = extend_desirable(case.desirable, case.cone)
    reduced = compute_kernel(reduced_dynamics(case.system, case.reduction), D_K, grid, controls,
                             dt, max_iter, threads=threads)
    full_in_reduced, witnesses = kernel_inclusion(full, reduced)
    return CaseStudyReport(
        full=full, sharp=sharp, reduced=reduced,
        extended_equals_original=D_K.same_as(case.desirable),
        full_in_sharp=kernel_inclusion(full, sharp)[0],
        sharp_in_full=kernel_inclusion(sharp, full)[0],
        full_in_reduced=full_in_reduced,
        symdiff=symmetric_difference(full, sharp),
        witnesses=witnesses,
    )
