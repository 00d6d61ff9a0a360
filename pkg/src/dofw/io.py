"""CSV import/export for streams, schedules, traces, regret reports and diagnostics.

Every file has a single header row and no comment lines. Agent and round
indices are written 1-based. Floats are written with 17 significant digits so they round-trip exactly.
"""

import csv
from pathlib import Path

import numpy as np

from .losses import RidgeStream
from .network import MixingSchedule


FLOAT = "%.17g"  # round-trips IEEE doubles exactly
INT = "%d"


def _save(path, header, table, fmt):
    """Write a 2-D table with one header row and no comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def _index_columns(T, n):
    """(t, i) columns, 1-based, agent index varying fastest."""
    return np.repeat(np.arange(1, T + 1), n), np.tile(np.arange(1, n + 1), T)


def write_stream(stream, path):
    """Rows (i, t, l, a_1..a_d) for every stored round."""
    R = 1 if stream.static else stream.rounds
    F = stream.features[:R].reshape(R * stream.n, stream.d)
    t, i = _index_columns(R, stream.n)
    table = np.column_stack([i, t, stream.labels[:R].reshape(-1), F])
    _save(path, ["i", "t", "l"] + [f"a_{k + 1}" for k in range(stream.d)], table,
          [INT, INT] + [FLOAT] * (stream.d + 1))


def read_stream(path, lambda1, T=None, static=False):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    i = data[:, 0].astype(int) - 1
    t = data[:, 1].astype(int) - 1
    n, R, d = i.max() + 1, t.max() + 1, data.shape[1] - 3
    F = np.empty((R, n, d))
    l = np.empty((R, n))
    F[t, i] = data[:, 3:]
    l[t, i] = data[:, 2]
    if T is None:
        T = R if static else R - 1
    return RidgeStream(F, l, float(lambda1), int(T), static)


def write_schedule(schedule, path):
    """One n-row block per round: (t, i, a_1..a_n)."""
    T, n = schedule.T, schedule.n
    t, i = _index_columns(T, n)
    table = np.column_stack([t, i, schedule.matrices.reshape(T * n, n)])
    _save(path, ["t", "i"] + [f"a_{j + 1}" for j in range(n)], table, [INT, INT] + [FLOAT] * n)


def read_schedule(path, Q, topology="custom"):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    T = int(data[:, 0].max())
    n = data.shape[1] - 2
    return MixingSchedule(data[:, 2:].reshape(T, n, n), int(Q), topology)


def write_trace(trace, path, timings=True):
    """Decisions x_{i,t} for t = 1..T with per-round compute time."""
    T, n, d = trace.T, trace.n, trace.d
    t, i = _index_columns(T, n)
    cols = [t, i, trace.x[:T].reshape(T * n, d)]
    header = ["t", "i"] + [f"x_{k + 1}" for k in range(d)]
    fmt = [INT, INT] + [FLOAT] * d
    if timings:
        cols.append(np.repeat(trace.round_time_ns, n))
        header.append("round_time_ns")
        fmt.append(INT)
    _save(path, header, np.column_stack(cols), fmt)


def write_trace_diagnostics(trace, path):
    """Full per-round state: x_hat, v, raw, tracked and mixed gradients."""
    if not trace.has_diagnostics:
        raise ValueError("trace was recorded without diagnostics")
    names = [k for k in ("x_hat", "v", "grad", "grad_bar", "grad_hat") if getattr(trace, k) is not None]
    T, n, d = trace.T, trace.n, trace.d
    t, i = _index_columns(T, n)
    table = np.column_stack([t, i] + [getattr(trace, k).reshape(T * n, d) for k in names])
    _save(path, ["t", "i"] + [f"{k}_{j + 1}" for k in names for j in range(d)], table,
          [INT, INT] + [FLOAT] * (d * len(names)))


def write_regret(report, path):
    """Per-prefix envelopes; budget and bound columns are NaN when not computed."""
    T = report.T
    extra = [np.full(T, np.nan) if e is None else np.broadcast_to(np.asarray(e, dtype=float), (T,))
             for e in (report.H, report.D, report.theorem1_rhs)]
    table = np.column_stack([np.arange(1, T + 1), report.avg_over_T, report.sup_envelope,
                             report.inf_envelope] + extra)
    _save(path, ["T_prime", "avg_regret_over_T", "sup_envelope", "inf_envelope", "H_T", "D_T",
                 "theorem1_rhs"], table, [INT] + [FLOAT] * 6)


def write_diagnostics(diag, path):
    T = diag.consensus_err.shape[0]
    table = np.column_stack([np.arange(1, T + 1), diag.consensus_err, diag.grad_consensus_err, diag.delta_sum])
    _save(path, ["t", "consensus_err", "grad_consensus_err", "delta_sum"], table, [INT] + [FLOAT] * 3)


def write_timing(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "algorithm", "backend", "d", "T", "mean_round_s", "total_s"])
        for r in rows:
            w.writerow([r.label, r.algorithm, r.backend, r.d, r.T, FLOAT % r.mean_round_s, FLOAT % r.total_s])
