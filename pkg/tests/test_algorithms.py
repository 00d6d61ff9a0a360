from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dofw import algorithms as alg, kernels, losses, network, sets
from dofw.algorithms import DOFW, DOGD, DOGD_LOCAL
from dofw.errors import ConfigError, DimensionError
from dofw.losses import RidgeStream


class LinearStream:
    """f_{i,t}(x) = <c_i, x>."""

    def __init__(self, C, T):
        self.C = np.asarray(C, dtype=float)
        self.n, self.d = self.C.shape
        self.T = T

    def value(self, i, t, x):
        return float(self.C[i] @ x)

    def gradient(self, i, t, x):
        return self.C[i].copy()


class DistanceStream(LinearStream):
    """f_{i,t}(x) = 0.5 ||x - c_i||^2."""

    def value(self, i, t, x):
        return 0.5 * float((x - self.C[i]) @ (x - self.C[i]))

    def gradient(self, i, t, x):
        return np.asarray(x, dtype=float) - self.C[i]


# two agents, lambda1 = 0, the same losses in both rounds (see tests/oracles)
A2 = np.array([[0.75, 0.25], [0.25, 0.75]])
FIXTURE_STREAM = RidgeStream(np.array([[[1.0, 2.0], [2.0, -1.0]]]), np.array([[1.0, 0.0]]), 0.0, 2, static=True)
X1 = np.eye(2)


def _f(rows):
    return np.array([[float(Fr(v)) for v in r] for r in rows])


DOFW_FIXTURE = {
    1: {"x_hat": _f([["3/4", "1/4"], ["1/4", "3/4"]]), "grad": _f([["1/4", "1/2"], ["-1/2", "1/4"]]),
        "grad_hat": _f([["1/16", "7/16"], ["-5/16", "5/16"]]), "v": _f([["1", "0"], ["1", "0"]]),
        "x_next": _f([["7/8", "1/8"], ["5/8", "3/8"]])},
    2: {"x_hat": _f([["13/16", "3/16"], ["11/16", "5/16"]]), "grad": _f([["3/16", "3/8"], ["17/8", "-17/16"]]),
        "grad_bar": _f([["0", "5/16"], ["37/16", "-1"]]),
        "grad_hat": _f([["37/64", "-1/64"], ["111/64", "-43/64"]]), "v": _f([["0", "1"], ["0", "1"]]),
        "x_next": _f([["13/32", "19/32"], ["11/32", "21/32"]])},
}


def test_dofw_round_hand_fixture():
    fs = sets.simplex(2)
    state = alg.DofwState.initial(X1)
    for t in (1, 2):
        state, rec = alg.dofw_round(state, A2, FIXTURE_STREAM, t, 0.5, fs)
        for key, expected in DOFW_FIXTURE[t].items():
            assert np.array_equal(getattr(rec, key), expected), (t, key)


def test_dofw_run_matches_fixture(backend):
    sched = network.MixingSchedule(np.stack([A2, A2]), 1)
    tr = alg.run(DOFW, sched, FIXTURE_STREAM, 0.5, sets.simplex(2), x_init=X1, backend=backend)
    assert np.array_equal(tr.x[1], DOFW_FIXTURE[1]["x_next"])
    assert np.array_equal(tr.x[2], DOFW_FIXTURE[2]["x_next"])
    assert np.array_equal(tr.grad_bar[1], DOFW_FIXTURE[2]["grad_bar"])


def test_dogd_round_hand_fixture(backend):
    expected = _f([["61/80", "19/80"], ["23/80", "57/80"]])
    x, _ = alg.dogd_round(X1, A2, FIXTURE_STREAM, 1, 0.1, sets.simplex(2))
    assert np.allclose(x, expected, rtol=0, atol=1e-15)
    sched = network.MixingSchedule(A2[None], 1)
    tr = alg.run(DOGD, sched, FIXTURE_STREAM, 0.1, sets.simplex(2), x_init=X1, backend=backend)
    assert np.allclose(tr.x[1], expected, rtol=0, atol=1e-15)


def test_centralized_fw_full_step():
    s = LinearStream([[1.0, -1.0]], 1)
    state, rec = alg.dofw_round(alg.DofwState.initial([[1.0, 0.0]]), np.eye(1), s, 1, 1.0, sets.simplex(2))
    assert np.array_equal(rec.grad_hat[0], [1, -1]) and np.array_equal(rec.v[0], [0, 1])
    assert np.array_equal(state.x[0], [0, 1])


def test_identical_agents_complete_network():
    n, d, T = 4, 3, 20
    F = np.broadcast_to(np.random.default_rng(0).uniform(-5, 5, (T + 1, 1, d)), (T + 1, n, d))
    l = np.broadcast_to(np.arange(T + 1.0)[:, None], (T + 1, n))
    s = RidgeStream(F, l, 1e-3, T)
    sched = network.generate_schedule(n, T, 1, topology=network.STATIC_COMPLETE)
    x0 = sets.sample(sets.simplex(d), n, np.random.default_rng(1))
    tr = alg.run(DOFW, sched, s, 0.3, sets.simplex(d), x_init=x0)
    assert np.abs(tr.x_hat - tr.x_hat[:, :1]).max() <= 1e-15


def test_dogd_zero_step_and_exact_minimization():
    fs = sets.simplex(3)
    s = DistanceStream([[0.2, 0.3, 0.5]], 1)
    x = np.array([[0.1, 0.1, 0.8]])
    assert np.array_equal(alg.dogd_round(x, np.eye(1), s, 1, 0.0, fs)[0], x)
    assert np.allclose(alg.dogd_round(x, np.eye(1), s, 1, 1.0, fs)[0], [[0.2, 0.3, 0.5]], atol=1e-15)


def test_round_errors(small_setup):
    stream, sched, fs = small_setup
    state = alg.DofwState.initial(alg.default_x_init(5, fs))
    with pytest.raises(ValueError):
        alg.dofw_round(state, sched.at(1), stream, 1, 0.0, fs)
    with pytest.raises(ValueError):
        alg.dofw_round(state, sched.at(1), stream, 1, 1.5, fs)
    with pytest.raises(ValueError, match="tracking memory"):
        alg.dofw_round(state, sched.at(2), stream, 2, 0.5, fs)
    with pytest.raises(DimensionError):
        alg.dofw_round(state, np.eye(4), stream, 1, 0.5, fs)
    bad = sched.at(1).copy()
    bad[0, 0] += 0.1
    with pytest.raises(ValueError, match="doubly stochastic"):
        alg.dofw_round(state, bad, stream, 1, 0.5, fs)
    with pytest.raises(ValueError):
        alg.dogd_round(state.x, sched.at(1), stream, 1, -0.1, fs)


def test_run_errors(small_setup):
    stream, sched, fs = small_setup
    with pytest.raises(ValueError, match="horizon"):
        alg.run(DOFW, sched, stream, 0.1, fs, T=61)
    with pytest.raises(ValueError, match="feasible"):
        alg.run(DOFW, sched, stream, 0.1, fs, x_init=np.ones((5, 4)))
    with pytest.raises(DimensionError):
        alg.run(DOFW, sched, stream, 0.1, sets.simplex(3))
    with pytest.raises(ValueError):
        alg.run("sgd", sched, stream, 0.1, fs)


def test_run_single_round_and_determinism(small_setup):
    stream, sched, fs = small_setup
    tr = alg.run(DOFW, sched, stream, 0.2, fs, T=1)
    assert tr.T == 1 and tr.x.shape == (2, 5, 4) and tr.grad.shape == (1, 5, 4)
    a = alg.run(DOFW, sched, stream, alg.power(0.25, 0.4), fs)
    b = alg.run(DOFW, sched, stream, alg.power(0.25, 0.4), fs)
    for k in ("x", "x_hat", "v", "grad", "grad_bar", "grad_hat"):
        assert getattr(a, k).tobytes() == getattr(b, k).tobytes()


@pytest.mark.parametrize("fset", [sets.simplex(4), sets.l1_ball(4, 1.5), sets.box(4, -1.0, 1.0)])
@pytest.mark.parametrize("algorithm,variant", [(DOFW, None), (DOGD, "mixed"), (DOGD, DOGD_LOCAL)])
def test_backends_match_reference(fset, algorithm, variant):
    n, T = 5, 25
    stream = losses.generate_ridge(n, 4, T, seed=7)
    sched = network.generate_schedule(n, T, 5, seed=7, topology=network.RANDOM_GOSSIP)
    x0 = sets.sample(fset, n, np.random.default_rng(3))
    traces = [alg.run(algorithm, sched, stream, 0.05, fset, x_init=x0, backend=b, variant=variant or "mixed")
              for b in kernels.available_backends()]
    # reference per-agent rounds
    x = x0.copy()
    state = alg.DofwState.initial(x0)
    for t in range(1, T + 1):
        if algorithm == DOFW:
            state, _ = alg.dofw_round(state, sched.at(t), stream, t, 0.05, fset)
            x = state.x
        else:
            x, _ = alg.dogd_round(x, sched.at(t), stream, t, 0.05, fset, variant)
        for tr in traces:
            assert np.abs(tr.x[t] - x).max() <= 1e-12
    for tr in traces[1:]:
        assert np.abs(tr.x - traces[0].x).max() <= 1e-12


@pytest.mark.parametrize("n,topology", [(1, network.CYCLE_SPLIT), (2, network.CYCLE_SPLIT),
                                        (5, network.RANDOM_GOSSIP), (5, network.STATIC_COMPLETE)])
def test_trace_invariants(n, topology, backend):
    d, T = 4, 80
    fs = sets.simplex(d)
    stream = losses.generate_ridge(n, d, T, seed=n)
    sched = network.generate_schedule(n, T, max(n - 1, 2), seed=1, topology=topology)
    tr = alg.run(DOFW, sched, stream, 0.1, fs, backend=backend)
    assert tr.conservation_residual.max() <= 1e-8
    assert tr.avg_dynamics_residual.max() <= 1e-10
    for arr in (tr.x, tr.x_hat, tr.v):
        assert sets.violation(fs, arr.reshape(-1, d)) <= 1e-10
    assert np.abs(tr.grad_hat.sum(axis=1) - tr.grad.sum(axis=1)).max() <= 1e-8
    if n == 1:
        assert np.abs(tr.grad_hat - tr.grad).max() <= 1e-12


def test_single_agent_is_centralized_online_fw():
    d, T = 3, 30
    fs = sets.simplex(d)
    stream = losses.generate_ridge(1, d, T, seed=2)
    sched = network.generate_schedule(1, T, 1, topology=network.STATIC_COMPLETE)
    tr = alg.run(DOFW, sched, stream, 0.2, fs)
    x = alg.default_x_init(1, fs)[0]
    for t in range(1, T + 1):
        x = x + 0.2 * (sets.lmo(fs, stream.gradient(0, t, x)) - x)
        assert np.abs(tr.x[t, 0] - x).max() <= 1e-12


@given(st.permutations(range(5)))
def test_agent_order_does_not_matter(order):
    stream = losses.generate_ridge(5, 3, 4, seed=1)
    sched = network.generate_schedule(5, 4, 5, seed=1, topology=network.RANDOM_GOSSIP)
    fs = sets.simplex(3)
    a = alg.DofwState.initial(alg.default_x_init(5, fs))
    b = alg.DofwState.initial(alg.default_x_init(5, fs))
    for t in range(1, 5):
        a, ra = alg.dofw_round(a, sched.at(t), stream, t, 0.3, fs)
        b, rb = alg.dofw_round(b, sched.at(t), stream, t, 0.3, fs, order=list(order))
        assert ra.x_next.tobytes() == rb.x_next.tobytes()
        assert ra.grad_hat.tobytes() == rb.grad_hat.tobytes()


def test_alpha_at_examples():
    # 1 / (4 * 10**1.6) = 0.0062797160787739503 to 17 digits (exact-arithmetic oracle)
    assert alg.alpha_at(alg.power(0.25, 0.4), 10000) == pytest.approx(0.0062797160787739503, rel=1e-14)
    assert alg.alpha_at(alg.corollary1(1.0, 0.0), 4) == 0.5
    assert alg.alpha_at(alg.constant(1.0), 7) == 1.0
    assert alg.alpha_at(alg.power(3.0, 0.1), 2) == 1.0  # clamped
    assert alg.alpha_at(alg.corollary1(1.0, h_theta=0.5), 16) == pytest.approx(np.sqrt(5 / 16))


def test_alpha_at_errors():
    with pytest.raises(ConfigError):
        alg.alpha_at(alg.constant(0.0), 10)
    with pytest.raises(ConfigError):
        alg.alpha_at(alg.power(-1.0, 0.5), 10)
    with pytest.raises(ConfigError):
        alg.alpha_at(alg.StepSchedule("cosine"), 10)
    with pytest.raises(ValueError):
        alg.alpha_at(alg.constant(0.5), 0)


def test_step_config_round_trip():
    s = alg.power(0.25, 0.4)
    assert alg.StepSchedule.from_config(s.to_config()) == s


@given(st.floats(1e-3, 10), st.floats(0, 2), st.integers(1, 10**6))
def test_alpha_in_range(c, theta, T):
    a = alg.alpha_at(alg.power(c, theta), T)
    assert 0 < a <= 1
