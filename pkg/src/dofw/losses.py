"""Online loss streams.

The ridge stream gives agent ``i`` at round ``t`` the loss

    f_{i,t}(x) = 0.5 * (a_{i,t} . x - l_{i,t})**2 + lambda1 * ||x||**2

Rounds are 1-based and agents 0-based. A stream of horizon ``T`` materializes
``T + 1`` rounds so that variation budgets can look one round ahead.
"""

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import sets
from .errors import DimensionError


class LossStream(Protocol):
    n: int
    d: int
    T: int

    def value(self, i, t, x): ...

    def gradient(self, i, t, x): ...

    def values(self, t, X): ...

    def gradients(self, t, X): ...


@dataclass(frozen=True, eq=False)
class RidgeStream:
    """Materialized ridge-regression stream.

    ``features`` has shape (R, n, d) and ``labels`` (R, n). A static stream
    stores a single round (R == 1) that is served for every t.
    """

    features: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    lambda1: float
    T: int
    static: bool = False
    seed: int | None = None

    def __post_init__(self):
        F = np.ascontiguousarray(self.features, dtype=float)
        l = np.ascontiguousarray(self.labels, dtype=float)
        if F.ndim != 3 or l.shape != F.shape[:2]:
            raise DimensionError(f"features {F.shape} and labels {l.shape} disagree")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be >= 0")
        if not self.static and F.shape[0] < self.T:
            raise ValueError(f"{F.shape[0]} rounds stored, horizon {self.T} needs at least T")
        F.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "labels", l)

    @property
    def n(self):
        return self.features.shape[1]

    @property
    def d(self):
        return self.features.shape[2]

    @property
    def rounds(self):
        """Number of rounds that can be queried (T + 1 when lookahead is stored)."""
        return self.T + 1 if self.static else self.features.shape[0]

    def _row(self, t):
        if not 1 <= t <= self.rounds:
            raise IndexError(f"round {t} outside 1..{self.rounds}")
        return 0 if self.static else t - 1

    def round_arrays(self, t):
        """(features (n, d), labels (n,)) for round t, as read-only views."""
        r = self._row(t)
        return self.features[r], self.labels[r]

    def _agent(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"agent {i} outside 0..{self.n - 1}")
        return i

    def value(self, i, t, x):
        F, l = self.round_arrays(t)
        a = F[self._agent(i)]
        x = np.asarray(x, dtype=float)
        r = a @ x - l[i]
        return 0.5 * r * r + self.lambda1 * (x @ x)

    def gradient(self, i, t, x):
        F, l = self.round_arrays(t)
        a = F[self._agent(i)]
        x = np.asarray(x, dtype=float)
        return a * (a @ x - l[i]) + 2.0 * self.lambda1 * x

    def values(self, t, X):
        """Losses of all agents, agent i evaluated at row i of X."""
        F, l = self.round_arrays(t)
        r = np.einsum("ij,ij->i", F, X) - l
        return 0.5 * r * r + self.lambda1 * np.einsum("ij,ij->i", X, X)

    def gradients(self, t, X):
        F, l = self.round_arrays(t)
        r = np.einsum("ij,ij->i", F, X) - l
        return F * r[:, None] + 2.0 * self.lambda1 * X

    def global_value(self, t, x):
        """F_t(x), the network loss at a common point."""
        F, l = self.round_arrays(t)
        r = F @ x - l
        return 0.5 * (r @ r) + self.n * self.lambda1 * (x @ x)

    def global_values(self, t, X):
        """F_t at each row of X."""
        F, l = self.round_arrays(t)
        R = X @ F.T - l
        return 0.5 * np.einsum("ij,ij->i", R, R) + self.n * self.lambda1 * np.einsum("ij,ij->i", X, X)

    def quadratic(self, t):
        """(H, b, c) with F_t(x) = 0.5 x'Hx - b'x + c."""
        F, l = self.round_arrays(t)
        H = F.T @ F + 2.0 * self.n * self.lambda1 * np.eye(self.d)
        return H, F.T @ l, 0.5 * (l @ l)

    def truncated(self, T):
        """Same data with a shorter horizon (prefix-consistent generation)."""
        if T > self.T:
            raise ValueError("cannot extend a stream")
        if self.static:
            return RidgeStream(self.features, self.labels, self.lambda1, T, True, self.seed)
        return RidgeStream(self.features[:T + 1], self.labels[:T + 1], self.lambda1, T, False, self.seed)


def ridge_optimum_point(d):
    """The planted parameter [x_0]_k = 1/d."""
    return np.full(d, 1.0 / d)


def generate_ridge(n, d, T, lambda1=5e-6, seed=0, static_features=False):
    """Ridge stream with uniform[-5, 5] features and labels a.x_0 + 2 xi / (d sqrt(t)).

    Features and noise come from independent child generators and are drawn
    round-major, so a stream is a prefix of any longer stream with the same
    seed. With ``static_features`` one feature matrix is shared by all rounds.
    """
    n, d, T = int(n), int(d), int(T)
    if min(n, d, T) < 1:
        raise ValueError("n, d and T must be >= 1")
    feat_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    R = T + 1
    if static_features:
        F = np.broadcast_to(feat_rng.uniform(-5.0, 5.0, size=(n, d)), (R, n, d))
    else:
        F = feat_rng.uniform(-5.0, 5.0, size=(R, n, d))
    xi = noise_rng.uniform(0.0, 1.0, size=(R, n))
    t = np.arange(1, R + 1, dtype=float)
    labels = F @ ridge_optimum_point(d) + 2.0 * xi / (d * np.sqrt(t))[:, None]
    return RidgeStream(F, labels, float(lambda1), T, False, seed)


def static_stream(base, t=1, T=None):
    """Time-invariant stream serving round ``t`` of ``base`` at every round."""
    F, l = base.round_arrays(t)
    return RidgeStream(F[None], l[None], base.lambda1, base.T if T is None else int(T), True, base.seed)


@dataclass(frozen=True)
class LipschitzConstants:
    L_X: float
    G_X: float


def lipschitz_constants(stream, fset):
    """Loss and gradient Lipschitz bounds over the set, across all stored rounds.

    G_X is the largest Hessian norm ||a||^2 + 2 lambda1. The gradient norm is
    convex in x (norm of an affine map), so its maximum over a polytope is
    attained at a vertex; L_X enumerates them.
    """
    if not isinstance(stream, RidgeStream):
        raise TypeError("lipschitz_constants supports ridge streams")
    V = sets.vertices(fset)
    F = stream.features[:1] if stream.static else stream.features
    Lb = stream.labels[:1] if stream.static else stream.labels
    lam2 = 2.0 * stream.lambda1
    sq = np.einsum("rnd,rnd->rn", F, F)
    G_X = float(sq.max() + lam2)
    # ||a (a.v - l) + 2 lam v||^2 = c^2 |a|^2 + 4 lam c (a.v) + 4 lam^2 |v|^2, c = a.v - l
    vv = np.einsum("md,md->m", V, V)
    L2 = 0.0
    for r in range(F.shape[0]):
        av = F[r] @ V.T
        c = av - Lb[r][:, None]
        val = c * c * sq[r][:, None] + 2.0 * lam2 * c * av + lam2 * lam2 * vv[None, :]
        L2 = max(L2, float(val.max()))
    return LipschitzConstants(L_X=float(np.sqrt(max(L2, 0.0))), G_X=G_X)
