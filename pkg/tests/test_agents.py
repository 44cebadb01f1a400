import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustsim.agents import (
    AgentHyperparams,
    DqnAgent,
    DuelingNetwork,
    MarlPool,
    QTable,
    ReplayBuffer,
    TabularAgent,
    default_spec,
    discretize,
    discretize_value,
    double_q_target,
    double_q_targets,
    epsilon_greedy,
    load_agent,
    majority_vote,
    save_agent,
    sync_target,
    tabular_update,
    td_loss_and_grads,
    train_step,
)
from trustsim.agents.nn import Adam, glorot_uniform
from trustsim.env import Action

HP = AgentHyperparams()


# --- discretization -------------------------------------------------------


def test_discretize_value_examples():
    assert discretize_value(0.55, 0.0, 1.0, 10) == 5
    assert discretize_value(1.0, 0.0, 1.0, 10) == 9  # top edge lands in last bin
    assert discretize_value(-0.2, 0.0, 1.0, 10) == 0


def test_discretize_key_shape_and_bins():
    spec = default_spec()
    assert spec.bins.count(10) == 3  # mean_trust, variance, collusion_score
    assert spec.bins.count(5) == 13
    key = discretize(np.full(16, 0.5), spec)
    assert isinstance(key, bytes) and len(key) == 16


# --- tabular updates --------------------------------------------------------


def test_tabular_update_from_zero():
    q = QTable()
    tabular_update(q, b"s", 0, 10.0, b"t", HP)
    assert q.values(b"s")[0] == pytest.approx(1.0)


def test_tabular_update_with_bootstrap():
    q = QTable()
    q.row(b"t")[1] = 5.0
    tabular_update(q, b"s", 0, 10.0, b"t", HP)
    assert q.values(b"s")[0] == pytest.approx(1.495)


def test_tabular_update_contracts_toward_zero():
    q = QTable()
    q.row(b"s")[2] = 2.0
    tabular_update(q, b"s", 2, 0.0, b"t", HP)
    assert q.values(b"s")[2] == pytest.approx(1.8)


def test_qtable_unseen_reads_zeros():
    q = QTable()
    assert np.array_equal(q.values(b"nope"), np.zeros(3))
    assert len(q) == 0


# --- epsilon greedy ---------------------------------------------------------


def test_epsilon_greedy_pure_exploitation():
    rng = np.random.default_rng(0)
    assert epsilon_greedy(np.array([1.0, 3.0, 2.0]), 0.0, rng) == 1


def test_epsilon_greedy_tie_breaks_to_lowest_index():
    rng = np.random.default_rng(0)
    assert epsilon_greedy(np.array([2.0, 2.0, 1.0]), 0.0, rng) == 0


def test_epsilon_greedy_uniform_monte_carlo():
    rng = np.random.default_rng(42)
    q = np.array([1.0, 2.0, 3.0])
    counts = np.bincount([epsilon_greedy(q, 1.0, rng) for _ in range(10_000)], minlength=3)
    freqs = counts / 10_000
    assert np.all(freqs >= 0.31) and np.all(freqs <= 0.35)


def test_epsilon_greedy_validates_eps():
    with pytest.raises(ValueError):
        epsilon_greedy(np.zeros(3), 1.5, np.random.default_rng(0))


# --- dueling network ---------------------------------------------------------


def tiny_net(seed=0):
    return DuelingNetwork(input_dim=16, hidden_sizes=(4,), head_hidden=2, n_actions=3,
                          rng=np.random.default_rng(seed))


def test_forward_mean_centered_combination():
    net = DuelingNetwork(rng=np.random.default_rng(1))
    # craft exact head outputs by zeroing weights and setting biases
    for w in net.parameters():
        w[...] = 0.0
    net.vb1[:] = 2.0
    net.ab1[:] = [1.0, 2.0, 3.0]
    q = net.forward(np.zeros(16))
    assert np.allclose(q, [1.0, 2.0, 3.0])


def test_forward_constant_advantage_collapses_to_value():
    net = DuelingNetwork(rng=np.random.default_rng(1))
    for w in net.parameters():
        w[...] = 0.0
    net.vb1[:] = 7.0
    net.ab1[:] = 4.0
    assert np.allclose(net.forward(np.zeros(16)), 7.0)


def head_value(net, s):
    """Run the value head alone: V(s)."""
    h = s[None, :]
    for w, b in zip(net.trunk_w, net.trunk_b):
        h = np.maximum(h @ w + b, 0.0)
    vh = np.maximum(h @ net.vw0 + net.vb0, 0.0)
    return float((vh @ net.vw1 + net.vb1)[0, 0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dueling_identifiability_centered_advantage(seed):
    rng = np.random.default_rng(seed)
    net = tiny_net(seed)
    s = rng.normal(size=16)
    q = net.forward(s)
    # mean over actions of the advantage contribution (Q - V) must be zero
    v = head_value(net, s)
    assert abs(float(np.mean(q)) - v) < 1e-9


def test_forward_raises_on_nonfinite():
    net = tiny_net()
    net.vb1[:] = np.nan
    with pytest.raises(FloatingPointError):
        net.forward(np.ones(16))


# --- double Q targets --------------------------------------------------------


def test_double_q_terminal_returns_reward():
    net, tgt = tiny_net(1), tiny_net(2)
    assert double_q_target(5.0, np.zeros(16), True, net, tgt, 0.99) == 5.0


def test_double_q_worked_example():
    class Stub:
        def __init__(self, row):
            self.row = np.asarray(row)

        def forward(self, x):
            return np.tile(self.row, (len(x), 1))

    online = Stub([0.1, 0.9, 0.5])
    target = Stub([0.2, 0.4, 0.6])
    out = double_q_target(1.0, np.zeros(16), False, online, target, 0.99)
    assert out == pytest.approx(1.0 + 0.99 * 0.4)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_double_q_never_exceeds_max_target_bound(seed):
    rng = np.random.default_rng(seed)
    online, target = tiny_net(seed), tiny_net(seed + 1)
    s = rng.normal(size=(4, 16))
    r = rng.normal(size=4)
    targets = double_q_targets(r, s, np.zeros(4), online, target, 0.99)
    bound = r + 0.99 * target.forward(s).max(axis=1)
    assert np.all(targets <= bound + 1e-12)


def test_double_q_coincident_argmax_matches_single_network():
    net = tiny_net(3)
    s = np.random.default_rng(0).normal(size=(1, 16))
    via_double = double_q_targets(np.array([1.0]), s, np.zeros(1), net, net, 0.99)
    single = 1.0 + 0.99 * net.forward(s).max()
    assert via_double[0] == pytest.approx(single)


# --- gradients ----------------------------------------------------------------


def finite_difference_check(net, states, actions, targets, h=1e-5):
    """Max relative error between backprop and central differences.

    The loss is piecewise smooth; the caller must keep pre-activations away
    from the ReLU kinks or the difference quotient measures a subgradient.
    """
    _, grads = td_loss_and_grads(net, states, actions, targets, td_clip=None)
    rows = np.arange(len(actions))

    def loss_at():
        q, _ = net.forward_cached(states)
        delta = q[rows, actions] - targets
        return float(np.mean(delta**2))

    worst = 0.0
    for param, grad in zip(net.parameters(), grads):
        flat_p = param.reshape(-1)
        flat_g = grad.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = loss_at()
            flat_p[i] = orig - h
            down = loss_at()
            flat_p[i] = orig
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(flat_g[i]), 1e-6)
            worst = max(worst, abs(fd - flat_g[i]) / denom)
    return worst


def kink_free_fixture(seed=7, batch=5):
    """Tiny net and batch whose pre-activations all sit clear of the kinks."""
    rng = np.random.default_rng(seed)
    net = tiny_net(seed)
    for p in net.parameters():
        if p.ndim == 1:  # nonzero biases keep dead inputs off the exact kink
            p[...] = rng.normal(0.0, 0.3, size=p.shape)
    states = rng.normal(size=(batch, 16))
    actions = rng.integers(0, 3, size=batch)
    targets = rng.normal(size=batch)

    # verify the fixture really is kink-free before trusting the check
    h = states
    margin = np.inf
    for w, b in zip(net.trunk_w, net.trunk_b):
        pre = h @ w + b
        margin = min(margin, float(np.abs(pre).min()))
        h = np.maximum(pre, 0.0)
    for w0, b0 in ((net.vw0, net.vb0), (net.aw0, net.ab0)):
        pre = h @ w0 + b0
        margin = min(margin, float(np.abs(pre).min()))
    assert margin > 1e-3, "fixture sits on a ReLU kink; pick another seed"
    return net, states, actions, targets


def test_gradient_check_against_central_finite_differences():
    net, states, actions, targets = kink_free_fixture()
    assert finite_difference_check(net, states, actions, targets) < 1e-4


def test_train_step_skips_until_buffer_fills():
    hp = AgentHyperparams(batch_size=8)
    net, tgt = tiny_net(1), tiny_net(2)
    opt = Adam(net.parameters(), lr=hp.learning_rate)
    buf = ReplayBuffer(100, 16)
    assert train_step(net, tgt, buf, opt, hp, np.random.default_rng(0)) is None


def test_train_step_loss_finite_nonnegative():
    hp = AgentHyperparams(batch_size=8)
    rng = np.random.default_rng(3)
    net, tgt = tiny_net(1), tiny_net(2)
    opt = Adam(net.parameters(), lr=hp.learning_rate)
    buf = ReplayBuffer(100, 16)
    for _ in range(8):
        buf.push(rng.normal(size=16), int(rng.integers(3)), float(rng.normal()), rng.normal(size=16), False)
    loss = train_step(net, tgt, buf, opt, hp, rng)
    assert loss is not None and np.isfinite(loss) and loss >= 0.0


def test_overfit_single_transition():
    hp = AgentHyperparams(batch_size=1, learning_rate=5e-4)
    rng = np.random.default_rng(11)
    net, tgt = tiny_net(5), tiny_net(6)
    opt = Adam(net.parameters(), lr=hp.learning_rate)
    buf = ReplayBuffer(10, 16)
    s = rng.normal(size=16)
    buf.push(s, 1, 0.5, rng.normal(size=16), True)  # terminal: fixed target 0.5
    loss = None
    for _ in range(500):
        loss = train_step(net, tgt, buf, opt, hp, rng)
    assert loss is not None and loss < 1e-3


# --- target sync ----------------------------------------------------------------


def test_sync_target_copies_and_is_idempotent():
    net, tgt = tiny_net(1), tiny_net(2)
    s = np.random.default_rng(0).normal(size=16)
    assert not np.allclose(net.forward(s), tgt.forward(s))
    sync_target(net, tgt)
    assert np.allclose(net.forward(s), tgt.forward(s))
    snapshot = tgt.forward(s).copy()
    sync_target(net, tgt)
    assert np.array_equal(tgt.forward(s), snapshot)


def test_target_unchanged_before_first_sync():
    rng = np.random.default_rng(12)
    hp = AgentHyperparams(batch_size=4, target_sync_every=10_000)
    agent = DqnAgent(hp, rng, episodes_total=10)
    s = rng.normal(size=16)
    before = agent.target.forward(s).copy()
    for _ in range(20):
        agent.observe(rng.normal(size=16), int(rng.integers(3)), float(rng.normal()), rng.normal(size=16), False)
    assert np.array_equal(agent.target.forward(s), before)


# --- replay buffer ----------------------------------------------------------------


def test_replay_uniform_inclusion_frequencies():
    rng = np.random.default_rng(42)
    buf = ReplayBuffer(100, 2)
    for i in range(100):
        buf.push(np.array([i, 0.0]), 0, 0.0, np.zeros(2), False)
    counts = np.zeros(100)
    batches = 10_000
    for _ in range(batches):
        idx = buf.sample_indices(64, rng)
        assert len(set(idx.tolist())) == 64  # without replacement
        counts[idx] += 1
    expected = batches * 64 / 100
    assert np.all(np.abs(counts - expected) / expected < 0.05)


def test_replay_ring_overwrites_oldest():
    buf = ReplayBuffer(4, 1)
    for i in range(6):
        buf.push(np.array([float(i)]), 0, 0.0, np.zeros(1), False)
    assert len(buf) == 4
    assert set(buf.states[:, 0].tolist()) == {2.0, 3.0, 4.0, 5.0}


def test_replay_rejects_oversized_batch():
    buf = ReplayBuffer(10, 1)
    buf.push(np.zeros(1), 0, 0.0, np.zeros(1), False)
    with pytest.raises(ValueError):
        buf.sample_indices(2, np.random.default_rng(0))


# --- epsilon schedule ----------------------------------------------------------------


def test_epsilon_schedule_reaches_floor_at_80_percent():
    hp = AgentHyperparams()
    agent = TabularAgent(hp, np.random.default_rng(0), episodes_total=50)
    values = []
    for _ in range(50):
        values.append(agent.eps)
        agent.end_episode()
    assert all(a >= b for a, b in zip(values, values[1:]))  # nonincreasing
    assert values[40] == pytest.approx(0.05, rel=0.01)
    assert agent.eps >= 0.05


# --- MARL pool ----------------------------------------------------------------


def test_majority_vote_examples():
    assert majority_vote([2] * 9 + [0] * 7) == 2
    assert majority_vote([2] * 8 + [0] * 8) == int(Action.MAINTAIN)
    assert majority_vote([0, 0, 1]) == 0


def test_marl_greedy_pool_is_unanimous():
    pool = MarlPool(HP, np.random.default_rng(0), n_agents=16, episodes_total=50)
    pool.eps = 0.0
    s = np.random.default_rng(1).normal(size=16)
    votes = pool.vote(s)
    assert len(set(votes)) == 1
    assert pool.act(s) == votes[0]


def test_marl_shared_parameters_single_store():
    pool = MarlPool(HP, np.random.default_rng(0), n_agents=16)
    s = np.random.default_rng(2).normal(size=16)
    q_before = pool.online.forward(s).copy()
    rng = np.random.default_rng(3)
    for _ in range(80):
        state = rng.normal(size=16)
        a = pool.act(state)
        pool.observe(state, a, float(rng.normal()), rng.normal(size=16), False)
    assert not np.allclose(pool.online.forward(s), q_before)  # training moved the one store
    # every agent sees identical Q-values because there is only one store
    assert np.array_equal(pool.qvalues(s), pool.acting.forward(s))


def test_marl_acting_policy_refreshes_on_schedule():
    hp = AgentHyperparams(marl_sync_every=10)
    pool = MarlPool(hp, np.random.default_rng(0), n_agents=4)
    rng = np.random.default_rng(1)
    s_probe = rng.normal(size=16)
    stale = pool.acting.forward(s_probe).copy()
    for step in range(1, 10):
        state = rng.normal(size=16)
        pool.observe(state, pool.act(state), 1.0, rng.normal(size=16), False)
        assert np.array_equal(pool.acting.forward(s_probe), stale), f"refreshed early at {step}"
    state = rng.normal(size=16)
    pool.observe(state, pool.act(state), 1.0, rng.normal(size=16), False)  # step 10
    assert np.array_equal(pool.acting.forward(s_probe), pool.online.forward(s_probe))


def test_marl_pooled_batch_quota():
    hp = AgentHyperparams(batch_size=64)
    pool = MarlPool(hp, np.random.default_rng(0), n_agents=16)
    rng = np.random.default_rng(1)
    for buf in pool.buffers:
        for _ in range(4):
            buf.push(rng.normal(size=16), 0, 0.0, rng.normal(size=16), False)
    batch = pool.pooled_batch()
    assert batch is not None
    assert len(batch[0]) == 64  # 4 from each of 16 buffers


def test_marl_noop_until_buffers_fill():
    pool = MarlPool(HP, np.random.default_rng(0), n_agents=16)
    assert pool.pooled_batch() is None
    assert pool.train_once() is None


# --- checkpoints ----------------------------------------------------------------


@pytest.mark.parametrize("kind", ["rl", "drl", "marl"])
def test_checkpoint_round_trip_bit_identical(tmp_path, kind):
    rng = np.random.default_rng(9)
    if kind == "rl":
        agent = TabularAgent(HP, rng, 50)
        for _ in range(50):
            s = rng.uniform(0, 1, 16)
            agent.observe(s, int(rng.integers(3)), float(rng.normal()), rng.uniform(0, 1, 16), False)
    elif kind == "drl":
        agent = DqnAgent(HP, rng, 50)
    else:
        agent = MarlPool(HP, rng, n_agents=16, episodes_total=50)

    path = tmp_path / f"{kind}.ckpt"
    save_agent(agent, path, seed=9)
    twin = load_agent(path)

    probes = np.random.default_rng(10).uniform(0, 1, size=(100, 16))
    for p in probes:
        assert np.array_equal(np.asarray(agent.qvalues(p)), np.asarray(twin.qvalues(p)))


def test_checkpoint_magic_rejected(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_agent(path)


# --- init ----------------------------------------------------------------


def test_glorot_bounds():
    rng = np.random.default_rng(0)
    w = glorot_uniform(16, 128, rng)
    limit = np.sqrt(6.0 / (16 + 128))
    assert np.all(np.abs(w) <= limit)


def test_hyperparam_validation():
    with pytest.raises(ValueError):
        AgentHyperparams(discount=0.0)
    with pytest.raises(ValueError):
        AgentHyperparams(eps_min=2.0)
    with pytest.raises(ValueError):
        AgentHyperparams(batch_size=20_000)
