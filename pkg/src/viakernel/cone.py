"""Closed convex cones and the preorders they induce.

Two representations are supported:

* orthants, given by a sign pattern ``s`` so that ``K = {x : s_j x_j >= 0}``;
* polyhedral cones, given by inward normals ``a_i`` (``K = {x : <a_i, x> >= 0}``)
  together with a generating set of rays.

Every membership test accepts stacked inputs of shape ``(..., n)`` and
returns a boolean array of shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9


class ConeError(ValueError):
    """Raised for malformed cones or dimension mismatches."""


def _as_rows(vectors, n=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(vectors, dtype=float))
    if arr.ndim != 2:
        raise ConeError(f"expected a list of vectors, got array of shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise ConeError(f"vectors have dimension {arr.shape[1]}, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class ConvexCone:
    """A polyhedral convex cone in R^n.

    Use :meth:`orthant` or :meth:`polyhedral` rather than the raw constructor.
    """

    kind: str
    normals: np.ndarray
    generators: np.ndarray
    signs: np.ndarray | None = None
    dual: np.ndarray | None = None
    tol: float = DEFAULT_TOL
    _interior_witness: np.ndarray | None = field(default=None, repr=False)

    # -- construction ---------------------------------------------------

    @classmethod
    def orthant(cls, signs, tol: float = DEFAULT_TOL) -> "ConvexCone":
        s = np.asarray(signs, dtype=float).ravel()
        if s.size == 0 or not np.all(np.isin(s, (-1.0, 1.0))):
            raise ConeError(f"orthant signs must be a non-empty vector of +-1, got {signs!r}")
        eye = np.diag(s)
        return cls("orthant", normals=eye, generators=eye.copy(), signs=s, dual=eye.copy(),
                   tol=float(tol), _interior_witness=s.copy())

    @classmethod
    def polyhedral(cls, normals, generators, dual_generators=None,
                   tol: float = DEFAULT_TOL) -> "ConvexCone":
        """Build ``{x : <a_i, x> >= 0}`` from normals and a matching set of rays.

        The generators are checked against the normals. When
        ``dual_generators`` is omitted the normals are used, which is exact:
        the dual of ``{x : A x >= 0}`` is the conic hull of the rows of ``A``.
        Supplied dual generators are validated against the rays.
        """
        a = _as_rows(normals)
        n = a.shape[1]
        g = _as_rows(generators, n)
        if np.any(g @ a.T < -tol):
            raise ConeError("a generator violates one of the normals")
        if dual_generators is None:
            d = a.copy()
        else:
            d = _as_rows(dual_generators, n)
            if np.any(g @ d.T < -tol):
                raise ConeError("a dual generator has negative inner product with a generator")
        return cls("polyhedral", normals=a, generators=g, dual=d, tol=float(tol),
                   _interior_witness=g.sum(axis=0))

    @classmethod
    def from_spec(cls, spec: dict, tol: float = DEFAULT_TOL) -> "ConvexCone":
        """Parse ``{"orthant": [...]}`` or ``{"polyhedral": {...}}``."""
        if not isinstance(spec, dict) or len(spec) != 1:
            raise ConeError(f"cone spec must have exactly one key, got {spec!r}")
        if "orthant" in spec:
            return cls.orthant(spec["orthant"], tol=tol)
        if "polyhedral" in spec:
            body = spec["polyhedral"]
            try:
                return cls.polyhedral(body["normals"], body["generators"],
                                      body.get("dual_generators"), tol=tol)
            except KeyError as exc:
                raise ConeError(f"polyhedral cone spec is missing {exc}") from None
        raise ConeError(f"unknown cone kind {next(iter(spec))!r}")

    def to_spec(self) -> dict:
        if self.kind == "orthant":
            return {"orthant": [int(v) for v in self.signs]}
        return {"polyhedral": {"normals": self.normals.tolist(),
                               "generators": self.generators.tolist(),
                               "dual_generators": self.dual.tolist()}}

    # -- basic properties -------------------------------------------------

    @property
    def n(self) -> int:
        return self.normals.shape[1]

    @property
    def has_interior(self) -> bool:
        w = self._interior_witness
        return bool(np.all(self.normals @ w > self.tol))

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise ConeError(f"dimension mismatch: cone lives in R^{self.n}, got shape {x.shape}")
        return x

    def slack(self, x) -> np.ndarray:
        """Inner products ``<a_i, x>`` for every normal, shape ``(..., n_normals)``."""
        x = self._vec(x)
        if self.kind == "orthant":
            return x * self.signs
        return x @ self.normals.T

    # -- relations --------------------------------------------------------

    def contains(self, x) -> np.ndarray | bool:
        out = np.all(self.slack(x) >= -self.tol, axis=-1)
        return bool(out) if out.ndim == 0 else out

    def leq(self, x, y):
        """``x <=_K y``, i.e. ``y - x`` lies in the cone."""
        return self.contains(self._vec(y) - self._vec(x))

    def strictly_less(self, x, y):
        """``x <<_K y``, i.e. ``y - x`` lies in the interior of the cone."""
        if not self.has_interior:
            raise ConeError("strict order is undefined: cone has empty interior")
        out = np.all(self.slack(self._vec(y) - self._vec(x)) > self.tol, axis=-1)
        return bool(out) if out.ndim == 0 else out

    def dual_generators(self) -> np.ndarray:
        """Finite generating set of the dual cone, one vector per row."""
        return self.dual.copy()

    def in_face(self, y, d):
        """Is ``d`` in ``K ∩ {y}^⊥``?"""
        y = self._vec(y)
        d = self._vec(d)
        ortho = np.abs(d @ y) <= self.tol
        out = np.logical_and(self.contains(d), ortho)
        return bool(out) if np.ndim(out) == 0 else out

    def face_generators(self, y) -> np.ndarray:
        """Generators of ``K`` lying in the face ``K ∩ {y}^⊥``.

        They generate the whole face when the generator list contains every
        extreme ray of the cone.
        """
        y = self._vec(y)
        keep = np.abs(self.generators @ y) <= self.tol
        return self.generators[keep]

    def defect(self, x) -> np.ndarray:
        """Polyhedral distance surrogate to the cone.

        ``max_y max(0, -<x, y>) / |y|`` over the dual generators; zero exactly
        when ``x`` is a member (at ``tol = 0``).
        """
        x = self._vec(x)
        d = self.dual
        norms = np.linalg.norm(d, axis=1)
        viol = np.maximum(0.0, -(x @ d.T)) / norms
        return viol.max(axis=-1) + 0.0

    def sample(self, rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
        """Random cone members as nonnegative combinations of the generators."""
        w = rng.exponential(scale, size=(size, self.generators.shape[0]))
        return w @ self.generators

    def __repr__(self) -> str:
        if self.kind == "orthant":
            return f"ConvexCone.orthant({self.signs.astype(int).tolist()})"
        return (f"ConvexCone.polyhedral(n={self.n}, normals={len(self.normals)}, "
                f"generators={len(self.generators)})")


def contains(cone: ConvexCone, x):
    return cone.contains(x)


def leq(cone: ConvexCone, x, y):
    return cone.leq(x, y)


def strictly_less(cone: ConvexCone, x, y):
    return cone.strictly_less(x, y)


def dual_generators(cone: ConvexCone) -> np.ndarray:
    return cone.dual_generators()


def in_face(cone: ConvexCone, y, d):
    return cone.in_face(y, d)
