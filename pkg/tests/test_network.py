import numpy as np
import pytest

from trustsim.network import (
    Vote,
    init_network,
    quorum,
    reset_profiles,
    run_consensus_round,
    trust_separation,
)
from trustsim.trust import TrustUpdateConfig

CFG = TrustUpdateConfig()


def make_net(n=16, ratio=0.30, seed=42, family="nma"):
    return init_network(n, ratio, np.random.default_rng(seed), attack_family=family)


def test_init_malicious_count_default_configuration():
    net = make_net(16, 0.30, seed=42)
    assert int(net.malicious_mask.sum()) == 5


def test_init_zero_ratio():
    net = make_net(16, 0.0, seed=7)
    assert int(net.malicious_mask.sum()) == 0
    assert np.all(np.abs(net.trust_scores() - 0.5) < 0.05)


def test_init_rejects_tiny_network():
    with pytest.raises(ValueError):
        init_network(1, 0.3, np.random.default_rng(0))


def test_init_mean_trust_monte_carlo():
    means = []
    rng = np.random.default_rng(123)
    for _ in range(1000):
        net = init_network(16, 0.30, rng)
        means.append(net.trust_scores().mean())
    assert 0.48 <= float(np.mean(means)) <= 0.52


def test_quorum_thresholds():
    assert quorum(3) == 2
    assert quorum(5) == 4  # ceil(10/3)
    assert quorum(6) == 4
    assert quorum(9) == 6
    assert quorum(16) == 11


def test_round_all_honest_creates_block():
    net = make_net(16, 0.0)
    out = run_consensus_round(net, range(5), np.random.default_rng(0), CFG)
    assert out.block_created
    assert out.verified_tx == 10
    assert net.chain_length == 1
    assert net.verified_tx_total == 10


def test_round_three_of_five_valid_fails():
    net = make_net(16, 0.0)
    # mark two delegates malicious by hand: they vote invalid
    net.roles[3] = type(net.roles[3])(malicious=True, attack_family="nma")
    net.roles[4] = type(net.roles[4])(malicious=True, attack_family="nma")
    out = run_consensus_round(net, range(5), np.random.default_rng(0), CFG)
    assert not out.block_created
    assert out.verified_tx == 0


def test_round_boundary_four_of_six_succeeds():
    net = make_net(16, 0.0)
    net.roles[0] = type(net.roles[0])(malicious=True, attack_family="nma")
    net.roles[1] = type(net.roles[1])(malicious=True, attack_family="nma")
    out = run_consensus_round(net, range(6), np.random.default_rng(0), CFG)
    assert out.block_created


def test_round_rejects_empty_delegates():
    net = make_net()
    with pytest.raises(ValueError):
        run_consensus_round(net, [], np.random.default_rng(0), CFG)


def test_round_applies_valid_evidence_on_success():
    net = make_net(16, 0.0)
    before = net.alphas.copy()
    run_consensus_round(net, range(16), np.random.default_rng(0), CFG)
    assert np.all(net.alphas[:16] == before + CFG.delta_valid)


def test_round_penalizes_invalid_voters():
    net = make_net(16, 0.0)
    net.roles[0] = type(net.roles[0])(malicious=True, attack_family="nma")
    b0 = net.betas[0]
    a0 = net.alphas[0]
    run_consensus_round(net, range(16), np.random.default_rng(0), CFG, detect_p=0.0)
    assert net.betas[0] == b0 + CFG.delta_invalid
    assert net.alphas[0] == a0


def test_round_detected_misbehavior_draws_malicious_evidence():
    net = make_net(16, 0.0)
    net.roles[0] = type(net.roles[0])(malicious=True, attack_family="nma")
    a0 = net.alphas[0]
    b0 = net.betas[0]
    run_consensus_round(net, range(16), np.random.default_rng(0), CFG, detect_p=1.0)
    assert net.betas[0] == b0 + CFG.delta_malicious
    assert net.alphas[0] == pytest.approx(a0 * CFG.decay_gamma)


def test_conflicting_votes_counted_not_valid():
    net = make_net(16, 0.0)
    net.roles[0] = type(net.roles[0])(malicious=True, attack_family="bfi")
    out = run_consensus_round(
        net, range(16), np.random.default_rng(0), CFG, conflicting={0}
    )
    assert out.delegate_votes[0] is Vote.CONFLICTING
    assert out.block_created  # 15 of 16 >= 11


def test_chain_grows_every_step_without_adversaries():
    net = make_net(16, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(30):
        run_consensus_round(net, range(16), rng, CFG)
    assert net.chain_length == 30
    assert net.verified_tx_total == 300


def test_role_counts_preserved_across_reset():
    net = make_net(16, 0.30, seed=9)
    before = net.malicious_mask.copy()
    reset_profiles(net, np.random.default_rng(1))
    assert np.array_equal(net.malicious_mask, before)
    assert net.chain_length == 0
    assert net.step_index == 0


def test_trust_separation_forced_arithmetic():
    net = make_net(4, 0.0)
    net.roles[3] = type(net.roles[3])(malicious=True, attack_family="nma")
    net.alphas = np.array([8.0, 8.0, 8.0, 3.0])
    net.betas = np.array([2.0, 2.0, 2.0, 7.0])
    assert trust_separation(net) == pytest.approx(0.8 - 0.3)


def test_trust_separation_equal_means_zero():
    net = make_net(4, 0.0)
    net.roles[0] = type(net.roles[0])(malicious=True, attack_family="nma")
    net.alphas = np.full(4, 8.0)
    net.betas = np.full(4, 8.0)
    assert trust_separation(net) == 0.0


def test_trust_separation_mixed_values():
    net = make_net(3, 0.0)
    net.roles[2] = type(net.roles[2])(malicious=True, attack_family="nma")
    net.alphas = np.array([9.0, 7.0, 2.0])
    net.betas = np.array([1.0, 3.0, 8.0])
    assert trust_separation(net) == pytest.approx((0.9 + 0.7) / 2 - 0.2)


def test_trust_separation_requires_both_roles():
    net = make_net(4, 0.0)
    with pytest.raises(ValueError):
        trust_separation(net)
