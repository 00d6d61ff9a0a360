"""Round engines for distributed online Frank-Wolfe with gradient tracking
(DOFW) and the projected distributed online gradient descent baseline (DOGD).

``dofw_round`` and ``dogd_round`` are reference implementations that work
with any loss stream. ``run`` drives a whole horizon; for ridge streams it
calls the compiled kernels (or their numpy fallback) one round at a time.
"""

from dataclasses import dataclass, field
import time

import numpy as np

from . import kernels, sets
from .errors import ConfigError, DimensionError
from .losses import RidgeStream

DOFW = "dofw"
DOGD = "dogd"

DOGD_MIXED = "mixed"  # gradient at the mixed iterate x_hat_i
DOGD_LOCAL = "local"  # gradient at the agent's own x_i

_DS_TOL = 1e-10


# ---------------------------------------------------------------- step sizes

@dataclass(frozen=True)
class StepSchedule:
    """Constant step size selected from the horizon.

    kinds: ``constant`` (alpha), ``power`` (c / T**theta) and ``corollary1``
    (gamma * sqrt((H_hat + 1) / T)). For ``corollary1`` the variation
    estimate is ``h_estimate`` if given, else ``T**h_theta`` if given, else 0.
    """

    kind: str
    alpha: float | None = None
    c: float | None = None
    theta: float | None = None
    gamma: float | None = None
    h_estimate: float | None = None
    h_theta: float | None = None

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        kind = cfg.pop("kind")
        return cls(kind=kind, **cfg)

    def to_config(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


def constant(alpha):
    return StepSchedule("constant", alpha=float(alpha))


def power(c, theta):
    return StepSchedule("power", c=float(c), theta=float(theta))


def corollary1(gamma, h_estimate=None, h_theta=None):
    return StepSchedule("corollary1", gamma=float(gamma), h_estimate=h_estimate, h_theta=h_theta)


def alpha_at(step, T):
    """Step size for horizon T, clamped to (0, 1]."""
    if T < 1:
        raise ValueError("horizon must be >= 1")
    if step.kind == "constant":
        a = step.alpha
    elif step.kind == "power":
        a = step.c / T ** step.theta
    elif step.kind == "corollary1":
        if step.h_estimate is not None:
            h = step.h_estimate
        elif step.h_theta is not None:
            h = T ** step.h_theta
        else:
            h = 0.0
        a = step.gamma * np.sqrt((h + 1.0) / T)
    else:
        raise ConfigError(f"unknown step kind {step.kind!r}", "step.kind")
    if a is None or not a > 0:
        raise ConfigError(f"step size {a} is not positive", "step")
    return float(min(a, 1.0))


# ---------------------------------------------------------------- reference rounds

@dataclass
class DofwState:
    """All agents' DOFW state; row i belongs to agent i.

    ``grad_hat`` and ``grad_prev`` hold the tracked gradient and the raw local
    gradient of the previous round; both are None before round 1.
    """

    x: np.ndarray
    grad_hat: np.ndarray | None = None
    grad_prev: np.ndarray | None = None
    t: int = 1

    @classmethod
    def initial(cls, x_init):
        return cls(x=np.array(x_init, dtype=float))


@dataclass
class RoundRecord:
    x_hat: np.ndarray
    grad: np.ndarray
    x_next: np.ndarray
    v: np.ndarray | None = None
    grad_bar: np.ndarray | None = None
    grad_hat: np.ndarray | None = None


def _check_round(X, A, stream, fset, t):
    n, d = X.shape
    if A.shape != (n, n):
        raise DimensionError(f"mixing matrix {A.shape} does not match {n} agents")
    if stream.n != n or stream.d != d or fset.d != d:
        raise DimensionError("stream, set and state dimensions disagree")
    if t < 1:
        raise ValueError("rounds are 1-based")
    if (np.abs(A.sum(axis=0) - 1).max() > _DS_TOL or np.abs(A.sum(axis=1) - 1).max() > _DS_TOL
            or A.min() < 0):
        raise ValueError("mixing matrix is not doubly stochastic")


def dofw_round(state, A, stream, t, alpha, fset, order=None):
    """One synchronous DOFW round for every agent.

    Each agent mixes neighbours' decisions, evaluates its gradient at the
    mixed point, updates its tracked gradient, mixes tracked gradients, calls
    the linear minimization oracle and moves toward the returned vertex.
    ``order`` permutes the agent processing order; results do not depend on it.
    """
    X = np.asarray(state.x, dtype=float)
    A = np.asarray(A, dtype=float)
    _check_round(X, A, stream, fset, t)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} outside (0, 1]")
    first = t == 1
    if not first and (state.grad_hat is None or state.grad_prev is None):
        raise ValueError(f"tracking memory missing at round {t}")
    n, d = X.shape
    order = range(n) if order is None else order
    x_hat = np.empty((n, d))
    grad = np.empty((n, d))
    grad_bar = np.empty((n, d))
    for i in order:
        x_hat[i] = A[i] @ X
        grad[i] = stream.gradient(i, t, x_hat[i])
        if first:
            grad_bar[i] = grad[i]
        else:
            grad_bar[i] = (state.grad_hat[i] + grad[i]) - state.grad_prev[i]
    grad_hat = np.empty((n, d))
    v = np.empty((n, d))
    x_next = np.empty((n, d))
    for i in order:
        grad_hat[i] = A[i] @ grad_bar
        v[i] = sets.lmo(fset, grad_hat[i])
        x_next[i] = alpha * (v[i] - x_hat[i]) + x_hat[i]
    new_state = DofwState(x=x_next, grad_hat=grad_hat, grad_prev=grad, t=t + 1)
    return new_state, RoundRecord(x_hat, grad, x_next, v, grad_bar, grad_hat)


def dogd_round(x, A, stream, t, alpha, fset, variant=DOGD_MIXED):
    """One synchronous DOGD round: mix, gradient step, project."""
    X = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float)
    _check_round(X, A, stream, fset, t)
    if not alpha >= 0:
        raise ValueError(f"alpha={alpha} must be >= 0")
    if variant not in (DOGD_MIXED, DOGD_LOCAL):
        raise ValueError(f"unknown DOGD variant {variant!r}")
    n, d = X.shape
    x_hat = np.empty((n, d))
    grad = np.empty((n, d))
    x_next = np.empty((n, d))
    for i in range(n):
        x_hat[i] = A[i] @ X
    for i in range(n):
        at = X[i] if variant == DOGD_LOCAL else x_hat[i]
        grad[i] = stream.gradient(i, t, at)
        x_next[i] = sets.project(fset, x_hat[i] - alpha * grad[i])
    return x_next, RoundRecord(x_hat, grad, x_next)


# ---------------------------------------------------------------- full runs

@dataclass(eq=False)
class RunTrace:
    """Record of a run over rounds 1..T.

    ``x[k]`` holds every agent's decision at round k + 1, so ``x`` has T + 1
    entries (the last is the decision after the final round). The remaining
    per-round arrays have T entries and are only kept with ``diagnostics``.
    Check series (conservation, average dynamics, feasibility) are always kept.
    """

    algorithm: str
    alpha: float
    x: np.ndarray = field(repr=False)
    round_time_ns: np.ndarray = field(repr=False)
    conservation_residual: np.ndarray = field(repr=False)
    avg_dynamics_residual: np.ndarray = field(repr=False)
    feasibility_residual: np.ndarray = field(repr=False)
    x_hat: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    grad: np.ndarray | None = field(default=None, repr=False)
    grad_bar: np.ndarray | None = field(default=None, repr=False)
    grad_hat: np.ndarray | None = field(default=None, repr=False)
    backend: str = ""
    variant: str | None = None
    label: str = ""

    @property
    def T(self):
        return self.x.shape[0] - 1

    @property
    def n(self):
        return self.x.shape[1]

    @property
    def d(self):
        return self.x.shape[2]

    @property
    def has_diagnostics(self):
        return self.x_hat is not None and self.grad is not None


def default_x_init(n, fset):
    """Common starting vertex for all agents: e_1 on the simplex, r e_1 on the l1 ball, lo on a box."""
    v = sets.lmo(fset, -np.eye(fset.d)[0]) if fset.kind != sets.BOX else fset.lo.copy()
    return np.tile(v, (n, 1))


def run(algorithm, schedule, stream, step, fset, x_init=None, T=None, diagnostics=True,
        backend=None, variant=DOGD_MIXED, label=""):
    """Run DOFW or DOGD for T rounds (default: the schedule's horizon).

    ``step`` may be a StepSchedule or a float step size. Ridge streams go
    through the round kernels; any other stream uses the reference rounds.
    """
    if algorithm not in (DOFW, DOGD):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    T = schedule.T if T is None else int(T)
    if T < 1 or T > schedule.T or T > stream.T:
        raise ValueError(f"horizon {T} exceeds schedule ({schedule.T}) or stream ({stream.T})")
    n, d = schedule.n, fset.d
    if stream.n != n or stream.d != d:
        raise DimensionError("schedule, stream and set dimensions disagree")
    alpha = alpha_at(step, T) if isinstance(step, StepSchedule) else float(step)
    if algorithm == DOFW and not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} outside (0, 1]")
    x0 = default_x_init(n, fset) if x_init is None else np.array(x_init, dtype=float)
    if x0.shape != (n, d):
        raise DimensionError(f"x_init has shape {x0.shape}, expected {(n, d)}")
    if sets.violation(fset, x0) > 1e-10:
        raise ValueError("initial decisions must be feasible")

    xs = np.empty((T + 1, n, d))
    xs[0] = x0
    keep_v = algorithm == DOFW
    full = {}
    if diagnostics:
        names = ["x_hat", "grad"] + (["v", "grad_bar", "grad_hat"] if keep_v else [])
        full = {k: np.empty((T, n, d)) for k in names}
    times = np.empty(T, dtype=np.int64)
    cons = np.zeros(T)
    avgres = np.zeros(T)
    feas = np.zeros(T)

    use_kernel = isinstance(stream, RidgeStream)
    k = kernels.get_backend(backend) if use_kernel else None
    kind, radius, lo, hi = fset.kernel_args()
    scratch = {name: np.empty((n, d)) for name in ("x_hat", "grad", "v", "grad_bar", "grad_hat")}
    prev_gh, prev_g = np.empty((n, d)), np.empty((n, d))
    gh_prev = g_prev = None
    state = DofwState.initial(x0)
    clock = time.perf_counter_ns

    for t in range(1, T + 1):
        bufs = {name: (full[name][t - 1] if name in full else scratch[name]) for name in scratch}
        x_cur, x_next = xs[t - 1], xs[t]
        A = schedule.matrices[t - 1]
        if use_kernel:
            F, l = stream.round_arrays(t)
            if algorithm == DOFW:
                t0 = clock()
                k.dofw_round(A, x_cur, F, l, stream.lambda1, gh_prev, g_prev, t == 1, alpha,
                             kind, radius, lo, hi, bufs["x_hat"], bufs["grad"], bufs["grad_bar"],
                             bufs["grad_hat"], bufs["v"], x_next)
                times[t - 1] = clock() - t0
            else:
                t0 = clock()
                k.dogd_round(A, x_cur, F, l, stream.lambda1, alpha, variant == DOGD_LOCAL,
                             kind, radius, lo, hi, bufs["x_hat"], bufs["grad"], x_next)
                times[t - 1] = clock() - t0
        else:
            t0 = clock()
            if algorithm == DOFW:
                state, rec = dofw_round(state, A, stream, t, alpha, fset)
            else:
                _, rec = dogd_round(x_cur, A, stream, t, alpha, fset, variant)
            times[t - 1] = clock() - t0
            x_next[...] = rec.x_next
            for name in bufs:
                val = getattr(rec, name)
                if val is not None:
                    bufs[name][...] = val

        # checks run outside the timed region
        if algorithm == DOFW:
            cons[t - 1] = np.abs(bufs["grad_bar"].sum(axis=0) - bufs["grad"].sum(axis=0)).max()
            xa, va = x_cur.mean(axis=0), bufs["v"].mean(axis=0)
            avgres[t - 1] = np.abs(x_next.mean(axis=0) - (xa + alpha * (va - xa))).max()
            feas[t - 1] = max(sets.violation(fset, bufs["x_hat"]), sets.violation(fset, bufs["v"]),
                              sets.violation(fset, x_next))
            if use_kernel:
                # tracking memory for the next round; scratch buffers get overwritten
                np.copyto(prev_gh, bufs["grad_hat"])
                np.copyto(prev_g, bufs["grad"])
                gh_prev, g_prev = prev_gh, prev_g
        else:
            feas[t - 1] = max(sets.violation(fset, bufs["x_hat"]), sets.violation(fset, x_next))

    return RunTrace(
        algorithm=algorithm, alpha=alpha, x=xs, round_time_ns=times,
        conservation_residual=cons, avg_dynamics_residual=avgres, feasibility_residual=feas,
        backend=(k.BACKEND if use_kernel else "reference"),
        variant=variant if algorithm == DOGD else None, label=label, **full,
    )
