"""Grid approximation of viability kernels and the reduction machinery.

The kernel iteration is the discrete viability scheme: start from the cells
whose centers are admissible, then repeatedly discard every cell from which
no sampled control sends the center (by one RK4 step) within distance
``radius`` of a surviving cell center.

One-step images do not change between iterations, so for each (cell,
control) pair the candidate landing cells are computed once and stored in
compressed form; each iteration is then a gather over the current mask.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cone import ConvexCone
from .dynamics import ControlledSystem, Reduction, SamplingPlan, Report
from .flow import rk4_step

log = logging.getLogger(__name__)


# -- desirable sets -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesirableSet:
    """Admissible (state, control) pairs.

    The structured form is a product of intervals; unbounded sides are
    ``±inf``. An extra ``predicate(x, u)`` may be supplied for sets that are
    not boxes, at the price of losing the structured operations.
    """

    state_lower: np.ndarray
    state_upper: np.ndarray
    control_lower: np.ndarray
    control_upper: np.ndarray
    predicate: object = None

    def __post_init__(self):
        for name in ("state_lower", "state_upper", "control_lower", "control_upper"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))

    @classmethod
    def box(cls, state_lower, state_upper, control_lower, control_upper) -> "DesirableSet":
        lo = [-np.inf if v is None else v for v in state_lower]
        hi = [np.inf if v is None else v for v in state_upper]
        return cls(lo, hi, control_lower, control_upper)

    @property
    def structured(self) -> bool:
        return self.predicate is None

    def contains_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.state_lower) & (x <= self.state_upper), axis=-1)

    def contains_control(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.all((u >= self.control_lower) & (u <= self.control_upper), axis=-1)

    def contains(self, x, u) -> np.ndarray:
        out = self.contains_state(x) & self.contains_control(u)
        if self.predicate is not None:
            out = out & np.asarray(self.predicate(x, u), dtype=bool)
        return out

    def same_as(self, other: "DesirableSet") -> bool:
        return (self.structured and other.structured
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("state_lower", "state_upper", "control_lower", "control_upper")))

    def to_spec(self) -> dict:
        def enc(a):
            return [None if not np.isfinite(v) else float(v) for v in a]
        return {"state_lower": enc(self.state_lower), "state_upper": enc(self.state_upper),
                "control_lower": enc(self.control_lower), "control_upper": enc(self.control_upper)}

    @classmethod
    def from_spec(cls, spec: dict) -> "DesirableSet":
        return cls.box(spec["state_lower"], spec["state_upper"],
                       spec["control_lower"], spec["control_upper"])


def reduced_dynamics(sys: ControlledSystem, red: Reduction) -> ControlledSystem:
    """``f_phi(x, u) = f(x, phi(u))`` on the same domains."""
    f = sys.f
    return ControlledSystem(sys.n, sys.m, lambda x, u: f(x, red(u)), sys.control_set,
                            sys.state_domain, name=f"{sys.name}∘{red.name}")


def extend_desirable(D: DesirableSet, cone: ConvexCone) -> DesirableSet:
    """Minkowski sum ``D + (K × {0})`` for a box ``D`` and an orthant ``K``.

    Adding the half-line ``s_j R_+`` to an interval removes its upper end
    when ``s_j = +1`` and its lower end when ``s_j = -1``. A cone equal to
    ``{0}`` (given as an empty polyhedral cone) leaves ``D`` unchanged.
    """
    if not D.structured:
        raise ValueError("extension needs the structured (box) form of the desirable set")
    if cone.kind != "orthant":
        if cone.kind == "polyhedral" and not np.any(cone.generators):
            return DesirableSet(D.state_lower, D.state_upper, D.control_lower, D.control_upper)
        raise ValueError("extension is only implemented for orthant cones")
    lo = np.where(cone.signs < 0, -np.inf, D.state_lower)
    hi = np.where(cone.signs > 0, np.inf, D.state_upper)
    return DesirableSet(lo, hi, D.control_lower.copy(), D.control_upper.copy())


def check_equality_condition(D: DesirableSet, cone: ConvexCone, red: Reduction,
                             samples: SamplingPlan, controls=None, scale: float = 1.0,
                             per_point: int = 4) -> Report:
    """Sampled test of ``(x + k, phi(u)) in D`` for ``(x, u) in D`` and ``k in K``.

    Points are drawn from ``D`` intersected with the sampling box; the cone
    directions are random nonnegative generator combinations whose norm is
    ``scale`` times the box diameter on average. Controls are drawn from
    ``D``'s control box, or from ``controls`` when given.
    """
    if not D.structured:
        raise ValueError("the equality condition check needs a structured desirable set")
    rng = samples.rng()
    lo = np.maximum(np.asarray(samples.state_lower, float), D.state_lower)
    hi = np.minimum(np.asarray(samples.state_upper, float), D.state_upper)
    rep = Report("equality condition (x+K) x phi(u) in D", worst_margin=np.inf)
    if np.any(lo > hi):
        rep.details.append("sampling box misses D; nothing to check")
        return rep
    n = samples.n_samples
    x = lo + rng.random((n, len(lo))) * (hi - lo)
    if controls is None:
        clo = D.control_lower
        chi = D.control_upper
        if not (np.all(np.isfinite(clo)) and np.all(np.isfinite(chi))):
            raise ValueError("unbounded control part; pass explicit controls")
        u = clo + rng.random((n, len(clo))) * (chi - clo)
    else:
        pts = np.atleast_2d(np.asarray(controls, dtype=float))
        u = pts[rng.integers(len(pts), size=n)]
    diam = float(np.linalg.norm(np.asarray(samples.state_upper, float)
                                - np.asarray(samples.state_lower, float)))
    x = np.repeat(x, per_point, axis=0)
    u = np.repeat(u, per_point, axis=0)
    k = cone.sample(rng, len(x), scale=scale * diam / max(1, cone.generators.shape[0]))
    ok = D.contains(x + k, red(u))
    rep.checked = len(x)
    rep.failed = int((~ok).sum())
    if rep.failed:
        i = int(np.flatnonzero(~ok)[0])
        rep.worst_margin = -1.0
        rep.witness = {"x": x[i], "u": u[i], "k": k[i], "phi(u)": red(u[i])}
    else:
        rep.worst_margin = 0.0
    return rep


# -- grids ------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform box grid. ``absorbing`` lists faces as ``(axis, "lower"|"upper")``."""

    lower: tuple
    upper: tuple
    shape: tuple
    absorbing: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        shape = tuple(int(v) for v in self.shape)
        if not (len(lo) == len(hi) == len(shape)) or any(s < 1 for s in shape):
            raise ValueError("grid lower/upper/shape must have matching lengths and positive sizes")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("grid window must have positive width on every axis")
        faces = tuple(sorted((int(a), str(s)) for a, s in self.absorbing))
        for a, s in faces:
            if s not in ("lower", "upper") or not 0 <= a < len(lo):
                raise ValueError(f"bad absorbing face {(a, s)}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "absorbing", faces)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def widths(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.lower[axis] + (np.arange(self.shape[axis]) + 0.5) * self.widths[axis]

    def centers(self) -> np.ndarray:
        """All cell centers in row-major (C) order, shape ``(size, ndim)``."""
        axes = [self.axis_centers(a) for a in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def default_radius(self, norm: str = "chebyshev") -> float:
        """Half the cell diagonal in cell units, measured in ``norm``."""
        return 0.5 * float(np.sqrt(self.ndim)) if norm == "euclidean" else 0.5

    def to_spec(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "shape": list(self.shape),
                "absorbing": [list(f) for f in self.absorbing]}

    @classmethod
    def from_spec(cls, spec: dict) -> "GridSpec":
        return cls(spec["lower"], spec["upper"], spec["shape"],
                   tuple(tuple(f) for f in spec.get("absorbing", ())))


@dataclass(eq=False)
class KernelGrid:
    spec: GridSpec
    mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool).reshape(self.spec.shape)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def member_centers(self) -> np.ndarray:
        return self.spec.centers()[self.mask.ravel()]

    def same_grid(self, other: "KernelGrid") -> bool:
        return self.spec == other.spec


# -- kernel computation ----------------------------------------------------

def _project(spec: GridSpec, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clamp images onto absorbing faces; flag images leaving through other faces."""
    lo = np.asarray(spec.lower)
    hi = np.asarray(spec.upper)
    p = p.copy()
    lost = np.zeros(len(p), dtype=bool)
    absorbing = set(spec.absorbing)
    for a in range(spec.ndim):
        below = p[:, a] < lo[a]
        above = p[:, a] > hi[a]
        if (a, "lower") in absorbing:
            p[below, a] = lo[a]
        else:
            lost |= below
        if (a, "upper") in absorbing:
            p[above, a] = hi[a]
        else:
            lost |= above
    return p, lost


def _neighbours(spec: GridSpec, p: np.ndarray, lost: np.ndarray, radius: float,
                norm: str = "euclidean"):
    """Cells whose centers lie within ``radius`` (cell units) of each image point,
    as (row, flat cell index) pairs sorted by row."""
    h = spec.widths
    lo = np.asarray(spec.lower)
    shape = np.asarray(spec.shape)
    rel = (p - lo) / h
    base = np.clip(np.floor(rel).astype(np.int64), 0, shape - 1)
    reach = int(np.ceil(radius + 0.5))
    strides = np.array([int(np.prod(shape[a + 1:])) for a in range(spec.ndim)], dtype=np.int64)
    rows, cells = [], []
    r2 = radius * radius * (1.0 + 1e-12)
    for off in itertools.product(range(-reach, reach + 1), repeat=spec.ndim):
        idx = base + np.asarray(off)
        inside = np.all((idx >= 0) & (idx < shape), axis=1) & ~lost
        gap = idx + 0.5 - rel
        if norm == "euclidean":
            close = np.sum(gap ** 2, axis=1) <= r2
        else:
            close = np.max(np.abs(gap), axis=1) <= radius * (1.0 + 1e-12)
        keep = np.flatnonzero(inside & close)
        rows.append(keep)
        cells.append(idx[keep] @ strides)
    rows = np.concatenate(rows)
    cells = np.concatenate(cells)
    order = np.lexsort((cells, rows))
    return rows[order], cells[order]


def compute_kernel(sys: ControlledSystem, D: DesirableSet, spec: GridSpec, controls, dt: float,
                   max_iter: int = 500, radius: float | None = None,
                   threads: int = 1, norm: str = "chebyshev") -> KernelGrid:
    """Discrete viability kernel of ``D`` under ``x+ = RK4_dt(x, u)``, ``u`` in ``controls``.

    Distances are measured in cell units (each axis scaled by its cell
    width) with the ``norm`` given; ``radius`` defaults to half the cell
    diagonal in that norm: ``1/2`` for ``"chebyshev"``, ``sqrt(n)/2`` for
    ``"euclidean"``.

    The Chebyshev ball of radius ``1/2`` around the centers of an
    order-closed set of cells is again order-closed for every orthant order,
    so the scheme keeps the comparison properties of monotone dynamics
    exactly; Euclidean balls do not, and can leave stray cells at the kernel
    boundary.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.size == 0:
        raise ValueError("at least one control sample is required")
    if controls.shape[1] != sys.m:
        controls = controls.reshape(-1, sys.m)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if spec.ndim != sys.n:
        raise ValueError("grid dimension does not match the system")
    if norm not in ("euclidean", "chebyshev"):
        raise ValueError(f"unknown norm {norm!r}")
    radius = spec.default_radius(norm) if radius is None else float(radius)

    centers = spec.centers()
    admissible = np.zeros(len(centers), dtype=bool)
    for u in controls:
        admissible |= D.contains(centers, np.broadcast_to(u, (len(centers), sys.m)))
    active = np.flatnonzero(admissible)

    # successor structure over (active cell, control) pairs
    n_ctrl = len(controls)

    def successors(chunk: np.ndarray):
        pts = np.repeat(centers[chunk], n_ctrl, axis=0)
        us = np.tile(controls, (len(chunk), 1))
        img = rk4_step(sys.f, pts, us, dt)
        img, lost = _project(spec, img)
        lost |= ~np.all(np.isfinite(img), axis=1)
        img = np.where(np.isfinite(img), img, 0.0)
        return _neighbours(spec, img, lost, radius, norm)

    chunks = np.array_split(active, max(1, int(np.ceil(len(active) / 20_000))))
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(successors, chunks))
    else:
        parts = [successors(c) for c in chunks]
    rows_all, cells_all = [], []
    offset = 0
    for c, (rows, cells) in zip(chunks, parts):
        rows_all.append(rows + offset)
        cells_all.append(cells)
        offset += len(c) * n_ctrl
    rows = np.concatenate(rows_all) if rows_all else np.empty(0, np.int64)
    cells = np.concatenate(cells_all) if cells_all else np.empty(0, np.int64)
    n_pairs = len(active) * n_ctrl

    mask = admissible.copy()
    history = [int(mask.sum())]
    iterations = 0
    converged = False
    while iterations < max_iter:
        hit = np.zeros(n_pairs, dtype=bool)
        hit[rows[mask[cells]]] = True
        keep = hit.reshape(len(active), n_ctrl).any(axis=1)
        new = np.zeros_like(mask)
        new[active[keep]] = True
        if np.any(new & ~mask):
            raise AssertionError("kernel iteration is not monotone")
        iterations += 1
        history.append(int(new.sum()))
        if np.array_equal(new, mask):
            converged = True
            break
        mask = new
    log.info("kernel: %d iterations, %d -> %d cells", iterations, history[0], history[-1])
    meta = {"dt": float(dt), "iterations": iterations, "converged": converged,
            "max_iter": int(max_iter), "controls": controls.tolist(), "radius": radius,
            "norm": norm,
            "system": sys.name, "initial_cells": history[0], "members": history[-1],
            "history": history}
    return KernelGrid(spec, mask.reshape(spec.shape), meta)


def kernel_inclusion(A: KernelGrid, B: KernelGrid) -> tuple[bool, list]:
    """Is every member cell of ``A`` a member of ``B``? Witnesses are ``A \\ B`` indices."""
    if not A.same_grid(B):
        raise ValueError("kernels live on different grids")
    diff = A.mask & ~B.mask
    witnesses = [tuple(int(i) for i in idx) for idx in np.argwhere(diff)]
    return not witnesses, witnesses


def symmetric_difference(A: KernelGrid, B: KernelGrid) -> int:
    if not A.same_grid(B):
        raise ValueError("kernels live on different grids")
    return int(np.sum(A.mask ^ B.mask))


def boundary_layer(K: KernelGrid) -> np.ndarray:
    """Member cells with at least one non-member face neighbour (window edges excluded)."""
    m = K.mask
    edge = np.zeros_like(m)
    for a in range(m.ndim):
        for shift in (1, -1):
            rolled = np.roll(m, shift, axis=a)
            valid = np.ones_like(m)
            sl = [slice(None)] * m.ndim
            sl[a] = 0 if shift == 1 else -1
            valid[tuple(sl)] = False
            edge |= m & valid & ~rolled
    return edge


def dilate(mask: np.ndarray, steps: int = 1) -> np.ndarray:
    """Grow a boolean mask by face neighbours, ``steps`` times."""
    out = mask.copy()
    for _ in range(steps):
        grown = out.copy()
        for a in range(out.ndim):
            fwd = np.zeros_like(out)
            bwd = np.zeros_like(out)
            sl_dst = [slice(None)] * out.ndim
            sl_src = [slice(None)] * out.ndim
            sl_dst[a], sl_src[a] = slice(1, None), slice(None, -1)
            fwd[tuple(sl_dst)] = out[tuple(sl_src)]
            bwd[tuple(sl_src)] = out[tuple(sl_dst)]
            grown |= fwd | bwd
        out = grown
    return out
