"""Dynamic regret, variation budgets, the regret bound and consensus diagnostics."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, sets
from .errors import ConvergenceError, DimensionError
from .losses import RidgeStream
from .network import ergodicity_constants


# ---------------------------------------------------------------- comparators

def _simplex_active_set(H, b, tol, max_iter):
    """Primal active-set solve of min 0.5 x'Hx - b'x over the unit simplex (H PD).

    Coordinates outside the free set are held at zero. Each iteration solves
    the equality-constrained problem on the free coordinates via its KKT
    system; an infeasible solution is approached up to the first blocking
    bound, a feasible one releases the coordinate with the most negative
    multiplier. The multipliers' minimum is minus the FW gap.
    """
    d = H.shape[0]
    x = np.full(d, 1.0 / d)
    free = np.ones(d, dtype=bool)
    for _ in range(max_iter):
        F = np.nonzero(free)[0]
        m = F.size
        K = np.zeros((m + 1, m + 1))
        K[:m, :m] = H[np.ix_(F, F)]
        K[:m, m] = K[m, :m] = 1.0
        z = np.linalg.solve(K, np.concatenate([b[F], [1.0]]))[:m]
        if z.min() >= 0.0:
            x = np.zeros(d)
            x[F] = z
            lam = H @ x - b
            lam -= lam[F].mean()
            lam[F] = 0.0
            k = int(lam.argmin())
            if lam[k] >= -tol:
                return x
            free[k] = True
            continue
        p = z - x[F]
        neg = p < 0
        ratios = x[F][neg] / -p[neg]
        j = int(ratios.argmin())
        x[F] += min(ratios[j], 1.0) * p
        block = F[neg][j]
        x[block] = 0.0
        free[block] = False
        x[~free] = 0.0
    raise ConvergenceError("active-set comparator solver hit its iteration cap")


def _projected_gradient(H, b, fset, tol, max_iter):
    """Accelerated projected gradient with restarts, stopped on the FW gap."""
    L = max(np.linalg.norm(H, 2), 1e-300)
    x = sets.project(fset, np.zeros(fset.d))
    y, tk = x.copy(), 1.0
    for _ in range(max_iter):
        g = H @ x - b
        if sets.fw_gap(fset, g, x) <= tol:
            return x
        x_new = sets.project(fset, y - (H @ y - b) / L)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        f_new = 0.5 * x_new @ H @ x_new - b @ x_new
        f_old = 0.5 * x @ H @ x - b @ x
        if f_new > f_old:  # restart momentum with a plain projected step
            x = sets.project(fset, x - g / L)
            y, tk = x.copy(), 1.0
            continue
        y = x_new + ((tk - 1.0) / t_new) * (x_new - x)
        x, tk = x_new, t_new
    raise ConvergenceError("projected-gradient comparator solver hit its iteration cap")


def solve_quadratic(H, b, fset, tol=1e-8, max_iter=None):
    """Minimize 0.5 x'Hx - b'x over the set; returns x with FW gap <= tol."""
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float)
    d = fset.d
    if H.shape != (d, d) or b.shape != (d,):
        raise DimensionError("quadratic data does not match the set dimension")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if fset.kind == sets.SIMPLEX and np.linalg.eigvalsh(H).min() > 0:
        x = _simplex_active_set(H, b, tol, max_iter or 10 * d + 50)
    else:
        x = _projected_gradient(H, b, fset, tol, max_iter or 200000)
    gap = sets.fw_gap(fset, H @ x - b, x)
    if gap > tol:
        raise ConvergenceError(f"comparator FW gap {gap:.3e} exceeds tol {tol:.1e}")
    return x


def per_round_optimum(stream, t, fset, tol=1e-8):
    """(x_t*, F_t(x_t*)) for the network loss F_t = sum_i f_{i,t}."""
    H, b, _ = stream.quadratic(t)
    x = solve_quadratic(H, b, fset, tol)
    return x, float(stream.global_value(t, x))


@dataclass(eq=False)
class ComparatorSeries:
    x_star: np.ndarray = field(repr=False)
    F_star: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)
    solver_tolerance: float = 1e-8

    @property
    def T(self):
        return self.F_star.shape[0]


def comparator_series(stream, fset, T=None, tol=1e-8):
    T = stream.T if T is None else int(T)
    xs = np.empty((T, fset.d))
    Fs = np.empty(T)
    gaps = np.empty(T)
    for t in range(1, T + 1):
        if t > 1 and getattr(stream, "static", False):
            xs[t - 1], Fs[t - 1], gaps[t - 1] = xs[0], Fs[0], gaps[0]
            continue
        H, b, _ = stream.quadratic(t)
        x = solve_quadratic(H, b, fset, tol)
        xs[t - 1] = x
        Fs[t - 1] = stream.global_value(t, x)
        gaps[t - 1] = sets.fw_gap(fset, H @ x - b, x)
    return ComparatorSeries(xs, Fs, gaps, tol)


# ---------------------------------------------------------------- regret

@dataclass(eq=False)
class RegretReport:
    """Cumulative per-agent dynamic regret for every prefix T' = 1..T.

    ``regret[k, j]`` is agent j's regret after T' = k + 1 rounds; the
    envelopes are taken over Regret / T'.
    """

    regret: np.ndarray = field(repr=False)
    avg_over_T: np.ndarray = field(repr=False)
    sup_envelope: np.ndarray = field(repr=False)
    inf_envelope: np.ndarray = field(repr=False)
    H: np.ndarray | None = field(default=None, repr=False)
    D: np.ndarray | None = field(default=None, repr=False)
    theorem1_rhs: np.ndarray | None = field(default=None, repr=False)

    @property
    def T(self):
        return self.regret.shape[0]


def dynamic_regret(trace, stream, comparators, at="x", H=None, D=None, theorem1_rhs=None):
    """Dynamic regret of each agent's decisions against the per-round optima.

    ``at="x"`` charges the played decisions x_{j,t}; ``at="x_hat"`` charges
    the mixed iterates instead (requires a diagnostics trace).
    """
    T = trace.T
    if comparators.T < T:
        raise DimensionError(f"comparators cover {comparators.T} rounds, trace has {T}")
    if at == "x":
        X = trace.x[:T]
    elif at == "x_hat":
        if trace.x_hat is None:
            raise ValueError("trace has no mixed iterates")
        X = trace.x_hat
    else:
        raise ValueError(f"unknown regret point {at!r}")
    per_round = np.empty((T, trace.n))
    for t in range(1, T + 1):
        per_round[t - 1] = stream.global_values(t, X[t - 1]) - comparators.F_star[t - 1]
    regret = np.cumsum(per_round, axis=0)
    scaled = regret / np.arange(1, T + 1)[:, None]
    return RegretReport(regret, scaled.mean(axis=1), scaled.max(axis=1), scaled.min(axis=1),
                        H=H, D=D, theorem1_rhs=theorem1_rhs)


# ---------------------------------------------------------------- variation budgets

@dataclass(eq=False)
class VariationSeries:
    per_round: np.ndarray = field(repr=False)
    cumulative: np.ndarray = field(repr=False)
    exact: bool = True

    @property
    def total(self):
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0


def _variation_inputs(stream, fset, T):
    if not isinstance(stream, RidgeStream):
        raise TypeError("variation budgets are implemented for ridge streams")
    T = stream.T if T is None else int(T)
    if T > stream.rounds - 1:
        raise ValueError(f"T={T} needs round T+1 but the stream stores {stream.rounds}")
    return T, sets.vertices(fset)


def _round_pairs(stream, T):
    if stream.static:
        F = np.broadcast_to(stream.features[0], (T, stream.n, stream.d))
        l = np.broadcast_to(stream.labels[0], (T, stream.n))
        return F, l, F, l
    return (stream.features[1:T + 1], stream.labels[1:T + 1],
            stream.features[:T], stream.labels[:T])


def variation_HT(stream, fset, T=None, backend=None):
    """Per-round f_{t,sup} = max_i max_x |f_{i,t+1}(x) - f_{i,t}(x)| and its running sum.

    The regularizer cancels, leaving 0.5 (p.x - l')^2 - 0.5 (q.x - l)^2 with
    p = a_{i,t+1}, q = a_{i,t}. Over a polytope the pair (p.x, q.x) ranges over
    the 2-D hull of the vertex images, and an indefinite quadratic peaks on
    that hull's boundary, so the maximum is computed exactly edge by edge.
    """
    T, V = _variation_inputs(stream, fset, T)
    Fn, ln, Fo, lo = _round_pairs(stream, T)
    n = stream.n
    # a static stream repeats one round pair; evaluate it once and broadcast
    R = 1 if stream.static else T
    U = np.ascontiguousarray((Fn[:R] @ V.T).reshape(R * n, -1))
    W = np.ascontiguousarray((Fo[:R] @ V.T).reshape(R * n, -1))
    out = np.empty(R * n)
    kernels.get_backend(backend).max_abs_quad_diff(
        U, W, np.ascontiguousarray(ln[:R], dtype=float).reshape(-1),
        np.ascontiguousarray(lo[:R], dtype=float).reshape(-1), out)
    per_round = np.broadcast_to(out.reshape(R, n).max(axis=1), (T,)).copy()
    return VariationSeries(per_round, np.cumsum(per_round), exact=True)


def variation_DT(stream, fset, T=None):
    """Per-round g_{t,sup} = max_i max_x ||grad f_{i,t+1}(x) - grad f_{i,t}(x)|| and its running sum.

    The difference p (p.x - l') - q (q.x - l) is affine in x, so its norm is
    convex and peaks at a vertex. Writing alpha = p.v - l', beta = q.v - l,
    the squared norm is alpha^2 |p - q|^2 + 2 alpha (alpha - beta) (p - q).q
    + (alpha - beta)^2 |q|^2, which vanishes exactly for identical rounds.
    """
    T, V = _variation_inputs(stream, fset, T)
    Fn, ln, Fo, lo = _round_pairs(stream, T)
    per_round = np.empty(T)
    for t in range(T):
        p, q = Fn[t], Fo[t]
        a = p @ V.T - ln[t][:, None]
        b = q @ V.T - lo[t][:, None]
        dq = p - q
        ab = a - b
        dd = np.einsum("ij,ij->i", dq, dq)[:, None]
        dqq = np.einsum("ij,ij->i", dq, q)[:, None]
        qq = np.einsum("ij,ij->i", q, q)[:, None]
        sq = a * a * dd + 2.0 * a * ab * dqq + ab * ab * qq
        per_round[t] = np.sqrt(max(float(sq.max()), 0.0))
    return VariationSeries(per_round, np.cumsum(per_round), exact=True)


# ---------------------------------------------------------------- regret bound

@dataclass(frozen=True)
class Theorem1Bound:
    C1: float
    C2: float
    C3: float
    C4: float
    sigma: float
    gamma_cap: float
    rhs: object  # float, or array when T/H_T/D_T are arrays


def theorem1_bound(n, M, L_X, G_X, zeta, Q, alpha, T, H_T, D_T, x_init, grads_at_init):
    """Dynamic-regret upper bound C1 + C2 alpha T + 2n H_T / alpha + C3 / alpha + C4 D_T.

    ``x_init`` (n, d) are the initial decisions and ``grads_at_init`` (n, d)
    the first-round gradients at the mixed iterates. ``T``, ``H_T`` and
    ``D_T`` may be arrays to evaluate the bound on every prefix at once.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} outside (0, 1]")
    if zeta >= 4 * n * n:
        raise ValueError("zeta >= 4 n^2 leaves the contraction rate undefined")
    c = ergodicity_constants(zeta, n, Q)
    sigma, gam = c.sigma, c.gamma_cap
    x_init = np.asarray(x_init, dtype=float)
    grads_at_init = np.asarray(grads_at_init, dtype=float)
    k = gam / (1.0 - sigma)
    spread = np.linalg.norm(x_init - x_init.mean(axis=0), axis=1).sum()
    gnorm = np.linalg.norm(grads_at_init, axis=1).sum()
    xnorm = np.linalg.norm(x_init, axis=1).sum()
    C1 = (n * L_X * spread + 2.0 * M * n * k * gnorm
          + (n * L_X + 2.0 * M * G_X + 4.0 * M * n * G_X * k) * n * k * xnorm)
    C2 = (2.0 * n * n * L_X * M + (4.0 * M * G_X + n * L_X + 4.0 * M * n * G_X * k) * n * n * M * k
          + n * G_X * M * M / 2.0)
    C3 = n * L_X * M
    C4 = 2.0 * M * n * n * k + n * M
    T = np.asarray(T, dtype=float)
    rhs = C1 + C2 * alpha * T + 2.0 * n * np.asarray(H_T) / alpha + C3 / alpha + C4 * np.asarray(D_T)
    if np.ndim(rhs) == 0:
        rhs = float(rhs)
    return Theorem1Bound(float(C1), float(C2), float(C3), float(C4), sigma, gam, rhs)


# ---------------------------------------------------------------- consensus diagnostics

@dataclass(eq=False)
class Diagnostics:
    """Per-round consensus quantities of a DOFW trace.

    consensus_err[t]      sum_i ||x_hat_{i,t} - x_avg,t||
    grad_consensus_err[t] sum_i ||grad_hat_{i,t} - (1/n) sum_j grad f_{j,t}(x_hat_{j,t})||
    delta_sum[t]          sum_i ||grad f_{i,t}(x_hat_{i,t}) - grad f_{i,t-1}(x_hat_{i,t-1})|| (0 at t = 1)
    grad_sum_err[t]       sum_i ||sum_j grad f_{j,t}(x_hat_{j,t}) - grad_hat_{i,t}||
    """

    consensus_err: np.ndarray = field(repr=False)
    grad_consensus_err: np.ndarray = field(repr=False)
    delta_sum: np.ndarray = field(repr=False)
    grad_sum_err: np.ndarray = field(repr=False)

    def cumulative(self):
        return {k: np.cumsum(getattr(self, k)) for k in
                ("consensus_err", "grad_consensus_err", "delta_sum", "grad_sum_err")}


def consensus_diagnostics(trace):
    if not trace.has_diagnostics:
        raise ValueError("trace was recorded without diagnostics")
    T = trace.T
    x_avg = trace.x[:T].mean(axis=1, keepdims=True)
    cons = np.linalg.norm(trace.x_hat - x_avg, axis=2).sum(axis=1)
    if trace.grad_hat is None:
        nan = np.full(T, np.nan)
        return Diagnostics(cons, nan, nan.copy(), nan.copy())
    gsum = trace.grad.sum(axis=1, keepdims=True)
    gcons = np.linalg.norm(trace.grad_hat - gsum / trace.n, axis=2).sum(axis=1)
    gserr = np.linalg.norm(gsum - trace.grad_hat, axis=2).sum(axis=1)
    delta = np.zeros(T)
    delta[1:] = np.linalg.norm(np.diff(trace.grad, axis=0), axis=2).sum(axis=1)
    return Diagnostics(cons, gcons, delta, gserr)


@dataclass(eq=False)
class LemmaCheck:
    name: str
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    @property
    def violations(self):
        return int(np.count_nonzero(self.lhs > self.rhs))

    @property
    def ok(self):
        return self.violations == 0

    @property
    def max_ratio(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.rhs > 0, self.lhs / self.rhs, np.where(self.lhs > 0, np.inf, 0.0))
        return float(r.max())


def lemma_checks(trace, diag, *, sigma, gamma_cap, M, G_X, L_X, D_cum, H_cum=None,
                 stream=None, comparators=None):
    """Cumulative lemma inequalities on every prefix T' = 1..T.

    Returns checks for the consensus bound, the gradient-difference bound,
    the tracking-error bound and, when ``stream``, ``comparators`` and
    ``H_cum`` are given, the bound on the averaged iterate's regret.
    """
    T, n = trace.T, trace.n
    alpha = trace.alpha
    Tp = np.arange(1, T + 1, dtype=float)
    k = gamma_cap / (1.0 - sigma)
    cum = diag.cumulative()
    x1 = np.linalg.norm(trace.x[0], axis=1).sum()
    g1 = np.linalg.norm(trace.grad[0], axis=1).sum()
    D_cum = np.asarray(D_cum)[:T]
    checks = {}
    checks["consensus"] = LemmaCheck(
        "consensus", cum["consensus_err"], n * k * x1 + alpha * Tp * n * n * M * k)
    # sum_{t=2}^{T'} sum_i ||x_hat_{i,t-1} - x_avg,t-1|| = cum consensus up to T'-1
    prev_cons = np.concatenate([[0.0], cum["consensus_err"][:-1]])
    checks["gradient_difference"] = LemmaCheck(
        "gradient_difference", cum["delta_sum"], 2.0 * G_X * prev_cons + n * D_cum + n * M * G_X * alpha * Tp)
    checks["tracking"] = LemmaCheck(
        "tracking", cum["grad_consensus_err"], n * k * g1 + n * k * cum["delta_sum"])
    if stream is not None and comparators is not None and H_cum is not None:
        x_avg = trace.x[:T].mean(axis=1)
        gap = np.array([stream.global_value(t, x_avg[t - 1]) for t in range(1, T + 1)]) - comparators.F_star[:T]
        prev_gs = np.concatenate([[0.0], np.cumsum(diag.grad_sum_err)[:-1]])
        H_cum = np.asarray(H_cum)[:T]
        checks["average_regret"] = LemmaCheck(
            "average_regret", np.cumsum(gap),
            2.0 * n * H_cum / alpha + n * L_X * M / alpha + 2.0 * M * prev_gs + 2.0 * M * G_X * prev_cons
            + n * G_X * M * M * alpha * Tp / 2.0 + n * M * D_cum)
    return checks


# ---------------------------------------------------------------- timing

@dataclass(frozen=True)
class TimingRow:
    algorithm: str
    d: int
    T: int
    mean_round_s: float
    total_s: float
    label: str = ""
    backend: str = ""


def timing_report(traces):
    """One row of wall-clock statistics per trace."""
    rows = []
    for tr in traces:
        ns = np.asarray(tr.round_time_ns, dtype=float)
        rows.append(TimingRow(tr.algorithm, tr.d, tr.T, float(ns.mean() / 1e9), float(ns.sum() / 1e9),
                              tr.label, tr.backend))
    return rows
