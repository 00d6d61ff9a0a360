"""Time-varying doubly stochastic mixing schedules.

A schedule is a stack of ``T`` row- and column-stochastic ``n x n`` matrices.
Rounds are 1-based: ``matrices[t - 1]`` is the matrix used at round ``t``.
Weight ``A[i, j] > 0`` means agent ``i`` receives from agent ``j``.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ScheduleError

CYCLE_SPLIT = "cycle_split"
RANDOM_GOSSIP = "random_gossip"
STATIC_COMPLETE = "static_complete"
TOPOLOGIES = (CYCLE_SPLIT, RANDOM_GOSSIP, STATIC_COMPLETE)

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MixingSchedule:
    matrices: np.ndarray = field(repr=False)
    Q: int
    topology: str = "custom"
    seed: int | None = None

    @property
    def n(self):
        return self.matrices.shape[1]

    @property
    def T(self):
        return self.matrices.shape[0]

    @property
    def zeta(self):
        """Smallest positive weight in the schedule."""
        A = self.matrices
        return float(A[A > 0].min())

    def at(self, t):
        if not 1 <= t <= self.T:
            raise IndexError(f"round {t} outside 1..{self.T}")
        return self.matrices[t - 1]

    def truncated(self, T):
        if not 1 <= T <= self.T:
            raise IndexError(f"horizon {T} outside 1..{self.T}")
        return MixingSchedule(self.matrices[:T], self.Q, self.topology, self.seed)


class Violation(NamedTuple):
    kind: str
    t: int
    index: object
    value: float


@dataclass
class Assumption1Report:
    ok: bool
    zeta_observed: float
    violations: list


@dataclass(frozen=True)
class ErgodicityConstants:
    sigma: float
    gamma_cap: float


@dataclass
class ErgodicityReport:
    max_ratio: float
    ok: bool
    worst: tuple = None


def ergodicity_constants(zeta, n, Q):
    """Geometric rate and constant bounding |Phi(t, s)_ij - 1/n|."""
    base = 1.0 - zeta / (4.0 * n * n)
    if not (zeta > 0 and base > 0):
        raise ValueError(f"zeta={zeta} must lie in (0, 4 n^2) for n={n}")
    return ErgodicityConstants(sigma=base ** (1.0 / Q), gamma_cap=base ** ((1.0 - 2.0 * Q) / Q))


def cycle_edges(n):
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(k, (k + 1) % n) for k in range(n)]


def min_period(n, topology):
    """Smallest Q for which the topology can certify joint connectivity."""
    if topology == CYCLE_SPLIT:
        return max(1, len(cycle_edges(n)) - 1)
    return 1


def metropolis(n, edges):
    """Symmetric Metropolis-Hastings weights on an undirected edge list."""
    W = np.zeros((n, n))
    deg = np.zeros(n, dtype=int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    for u, v in edges:
        w = 1.0 / (1.0 + max(deg[u], deg[v]))
        W[u, v] = W[v, u] = w
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return W


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return [groups[r] for r in sorted(groups)]


def generate_schedule(n, T, Q, seed=0, topology=CYCLE_SPLIT):
    """Generate a schedule satisfying the bounded-weight, doubly stochastic and
    Q-joint connectivity conditions.

    ``cycle_split`` activates one edge of a fixed Hamiltonian cycle per round
    with lazy pairwise weights 1/2; ``random_gossip`` draws a random matching
    each round and, at the last round of every Q-window whose union is still
    disconnected, injects edges chaining the components (Metropolis weights);
    ``static_complete`` uses uniform averaging every round.
    """
    n, T, Q = int(n), int(T), int(Q)
    if n < 1 or T < 1 or Q < 1:
        raise ScheduleError("n, T and Q must all be >= 1")
    if topology not in TOPOLOGIES:
        raise ScheduleError(f"unknown topology {topology!r}")
    if Q < min_period(n, topology):
        raise ScheduleError(
            f"Q={Q} too small for {topology} with n={n}: joint strong connectivity "
            f"of every Q-window needs Q >= {min_period(n, topology)}"
        )
    mats = np.empty((T, n, n))
    if topology == STATIC_COMPLETE:
        mats[...] = 1.0 / n
    elif topology == CYCLE_SPLIT:
        edges = cycle_edges(n)
        for t in range(T):
            A = np.eye(n)
            if edges:
                u, v = edges[t % len(edges)]
                A[u, u] = A[v, v] = A[u, v] = A[v, u] = 0.5
            mats[t] = A
    else:
        rng = np.random.default_rng(seed)
        window = []
        for t in range(1, T + 1):
            perm = rng.permutation(n)
            edges = [tuple(sorted((int(perm[k]), int(perm[k + 1])))) for k in range(0, n - 1, 2)]
            window.extend(edges)
            if t % Q == 0:
                comps = _components(n, window)
                extra = [(comps[k][0], comps[k + 1][0]) for k in range(len(comps) - 1)]
                edges = edges + extra
                window = []
            mats[t - 1] = metropolis(n, edges)
    return MixingSchedule(mats, Q, topology, seed)


def _strongly_connected(adj):
    n = adj.shape[0]
    for M in (adj, adj.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for b in np.nonzero(M[a])[0]:
                if not seen[b]:
                    seen[b] = True
                    queue.append(b)
        if not seen.all():
            return False
    return True


def verify_assumption1(schedule, zeta=None, tol=STOCHASTIC_TOL):
    """Check bounded weights, double stochasticity and Q-joint connectivity.

    With ``zeta`` given, every positive weight must exceed it; otherwise the
    observed minimum positive weight is reported and serves as the bound.
    Only complete Q-windows inside the horizon are checked for connectivity.
    """
    A = np.asarray(schedule.matrices)
    T, n, _ = A.shape
    violations = []
    positive = A[A > 0]
    zeta_observed = float(positive.min()) if positive.size else 0.0
    for t in range(T):
        At = A[t]
        if At.min() < 0:
            violations.append(Violation("negative", t + 1, tuple(np.unravel_index(At.argmin(), At.shape)), float(At.min())))
        for i, s in enumerate(At.sum(axis=1)):
            if abs(s - 1.0) > tol:
                violations.append(Violation("row_sum", t + 1, i, float(s)))
        for j, s in enumerate(At.sum(axis=0)):
            if abs(s - 1.0) > tol:
                violations.append(Violation("col_sum", t + 1, j, float(s)))
        for i in np.nonzero(np.diag(At) <= 0)[0]:
            violations.append(Violation("diagonal", t + 1, int(i), float(At[i, i])))
        if zeta is not None:
            small = np.argwhere((At > 0) & (At <= zeta))
            for i, j in small:
                violations.append(Violation("below_zeta", t + 1, (int(i), int(j)), float(At[i, j])))
    Q = schedule.Q
    if n > 1:
        for k in range(T // Q):
            union = (A[k * Q:(k + 1) * Q] > 0).any(axis=0)
            if not _strongly_connected(union):
                violations.append(Violation("disconnected_window", k * Q + 1, k, float(Q)))
    return Assumption1Report(ok=not violations, zeta_observed=zeta_observed, violations=violations)


def transition_matrix(schedule, t, s0):
    """Phi(t, s0) = A_t A_{t-1} ... A_{s0}."""
    if not (1 <= s0 <= t <= schedule.T):
        raise IndexError(f"need 1 <= s0 <= t <= {schedule.T}, got t={t}, s0={s0}")
    phi = schedule.matrices[s0 - 1].copy()
    for k in range(s0 + 1, t + 1):
        phi = schedule.matrices[k - 1] @ phi
    return phi


def check_ergodicity_bound(schedule, max_lag, zeta=None):
    """Largest ratio |Phi(t, s)_ij - 1/n| / (Gamma sigma^(t - s)) over all lags <= max_lag."""
    report = verify_assumption1(schedule)
    if not report.ok:
        raise ScheduleError(f"schedule violates the network assumption: {report.violations[:3]}")
    zeta = report.zeta_observed if zeta is None else zeta
    A = schedule.matrices
    T, n, _ = A.shape
    c = ergodicity_constants(zeta, n, schedule.Q)
    phis = A.copy()  # phis[s] = Phi(s + lag, s) for the current lag
    max_ratio, worst = 0.0, None
    for lag in range(0, min(max_lag, T - 1) + 1):
        count = T - lag
        dev = np.abs(phis[:count] - 1.0 / n).max(axis=(1, 2))
        ratios = dev / (c.gamma_cap * c.sigma ** lag)
        k = int(ratios.argmax())
        if ratios[k] > max_ratio:
            max_ratio, worst = float(ratios[k]), (k + lag + 1, k + 1)
        if lag < min(max_lag, T - 1):
            phis[:count - 1] = np.matmul(A[lag + 1:lag + count], phis[:count - 1])
    return ErgodicityReport(max_ratio=max_ratio, ok=max_ratio <= 1.0, worst=worst)
