"""Compact convex feasible sets: linear minimization oracle, projection, diameter.

Three polytopes are supported: the probability simplex, the l1 ball of radius
``r`` and an axis-aligned box. Points are plain 1-D float arrays.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import DimensionError, NonFiniteError, UnsupportedSetError
from . import kernels

SIMPLEX = "simplex"
L1_BALL = "l1ball"
BOX = "box"

_KIND_CODES = {SIMPLEX: kernels.KIND_SIMPLEX, L1_BALL: kernels.KIND_L1, BOX: kernels.KIND_BOX}

# box vertex enumeration is exponential in d
MAX_BOX_VERTEX_DIM = 16


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    kind: str
    d: int
    radius: float = 1.0
    lo: np.ndarray = field(default=None, repr=False)
    hi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if int(self.d) < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == BOX:
            lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.d,)).copy()
            hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.d,)).copy()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
                raise ValueError("box bounds must be finite with lo < hi")
        else:
            if not self.radius > 0:
                raise ValueError("radius must be positive")
            lo = np.zeros(self.d)
            hi = np.zeros(self.d)
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def code(self):
        return _KIND_CODES[self.kind]

    def kernel_args(self):
        """(kind code, radius, lo, hi) as consumed by the round kernels."""
        return self.code, float(self.radius), self.lo, self.hi

    def to_config(self):
        cfg = {"kind": self.kind, "d": self.d}
        if self.kind == L1_BALL:
            cfg["radius"] = self.radius
        elif self.kind == BOX:
            cfg["lo"] = self.lo.tolist()
            cfg["hi"] = self.hi.tolist()
        return cfg


def simplex(d):
    return FeasibleSet(SIMPLEX, int(d))


def l1_ball(d, radius=1.0):
    return FeasibleSet(L1_BALL, int(d), radius=float(radius))


def box(d, lo=0.0, hi=1.0):
    return FeasibleSet(BOX, int(d), lo=lo, hi=hi)


def from_config(cfg):
    """Build a set from ``{"kind": "simplex", "d": 8}``-style dictionaries."""
    kind = cfg.get("kind", SIMPLEX)
    d = cfg["d"]
    if kind == SIMPLEX:
        return simplex(d)
    if kind == L1_BALL:
        return l1_ball(d, cfg.get("radius", 1.0))
    if kind == BOX:
        return box(d, cfg.get("lo", 0.0), cfg.get("hi", 1.0))
    raise ValueError(f"unknown set kind {kind!r}")


def _check_point(fset, x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != fset.d:
        raise DimensionError(f"{name} has shape {x.shape}, expected ({fset.d},)")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return x


def lmo(fset, g):
    """Vertex minimizing <v, g> over the set; ties go to the lowest index."""
    g = _check_point(fset, g, "gradient")
    G = np.ascontiguousarray(g[None, :])
    out = np.empty_like(G)
    kernels.default.lmo_rows(G, *fset.kernel_args(), out)
    return out[0]


def project(fset, y):
    """Euclidean projection onto the set (sort-and-threshold for the simplex)."""
    y = _check_point(fset, y, "point")
    Y = np.ascontiguousarray(y[None, :])
    out = np.empty_like(Y)
    kernels.default.project_rows(Y, *fset.kernel_args(), out)
    return out[0]


def diameter(fset):
    if fset.kind == SIMPLEX:
        return float(np.sqrt(2.0)) if fset.d > 1 else 0.0
    if fset.kind == L1_BALL:
        return 2.0 * fset.radius
    return float(np.linalg.norm(fset.hi - fset.lo))


def vertices(fset):
    """All extreme points as rows of an (m, d) array."""
    d = fset.d
    if fset.kind == SIMPLEX:
        return np.eye(d)
    if fset.kind == L1_BALL:
        eye = fset.radius * np.eye(d)
        return np.vstack([eye, -eye])
    if d > MAX_BOX_VERTEX_DIM:
        raise UnsupportedSetError(f"box vertex enumeration limited to d <= {MAX_BOX_VERTEX_DIM}")
    corners = np.array(list(itertools.product((0, 1), repeat=d)), dtype=float)
    return fset.lo + corners * (fset.hi - fset.lo)


def violation(fset, X):
    """Largest constraint violation over the rows of ``X`` (0 when all feasible)."""
    X = np.atleast_2d(X)
    if fset.kind == SIMPLEX:
        return float(max(0.0, -X.min(), np.abs(X.sum(axis=1) - 1.0).max()))
    if fset.kind == L1_BALL:
        return float(max(0.0, (np.abs(X).sum(axis=1) - fset.radius).max()))
    return float(max(0.0, (fset.lo - X).max(), (X - fset.hi).max()))


def contains(fset, x, tol=1e-12):
    return violation(fset, x) <= tol


def sample(fset, size, rng):
    """Random feasible points, shape (size, d)."""
    d = fset.d
    if fset.kind == SIMPLEX:
        return rng.dirichlet(np.ones(d), size=size)
    if fset.kind == L1_BALL:
        w = rng.dirichlet(np.ones(d + 1), size=size)[:, :d]
        signs = rng.choice((-1.0, 1.0), size=(size, d))
        return fset.radius * w * signs
    return fset.lo + rng.random((size, d)) * (fset.hi - fset.lo)


def fw_gap(fset, grad, x):
    """Frank-Wolfe duality gap max_v <grad, x - v>."""
    return float(np.dot(grad, x) - np.dot(grad, lmo(fset, grad)))
