"""The MDP binding consensus, attacks, and defense agents.

State: 16 features over the (possibly corrupted) trust vector and recent
operational history.  Action: multiplicative delegation-ratio adjustment
in {0.9, 1.0, 1.1}, clipped to [0.1, 1.0].  Reward: detection-weighted
composite with a false-negative penalty and a capped collusion penalty.

The step ordering is normative: observe -> act -> adjust ratio -> access
gate -> delegate selection -> consensus round -> attack step -> apply
attack evidence -> reward -> agent update.  Reordering the attack and
evidence stages changes results.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import metrics
from .abac import PolicyGate
from .attacks import Attack, apply_perturbations
from .network import (
    NetworkState,
    run_consensus_round,
    trust_separation,
)
from .trust import DelegationPolicy, TrustUpdateConfig, round_half_up, sample_top_k


FEATURE_NAMES = (
    "mean_trust",
    "variance",
    "skewness",
    "median",
    "range",
    "iqr",
    "coeff_variation",
    "verified_tx_norm",
    "chain_length_norm",
    "honest_malicious_ratio",
    "low_trust_frac",
    "high_trust_frac",
    "delegation_efficiency",
    "throughput_rate",
    "recent_block_rate",
    "collusion_score",
)

STATE_DIM = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

LOW_TRUST_CUTOFF = 0.3
HIGH_TRUST_CUTOFF = 0.7
HISTORY_WINDOW = 10


class Action(enum.IntEnum):
    DECREASE = 0
    MAINTAIN = 1
    INCREASE = 2


ACTION_MULTIPLIERS = (0.9, 1.0, 1.1)
N_ACTIONS = len(ACTION_MULTIPLIERS)

RATIO_MIN = 0.1
RATIO_MAX = 1.0


def apply_action(ratio: float, action: Action) -> float:
    if not (RATIO_MIN <= ratio <= RATIO_MAX):
        raise ValueError(f"ratio {ratio} outside [{RATIO_MIN}, {RATIO_MAX}]")
    return float(np.clip(ratio * ACTION_MULTIPLIERS[action], RATIO_MIN, RATIO_MAX))


@dataclass(frozen=True)
class RewardConfig:
    w_f1: float = 0.7
    w_step: float = 0.3
    w_fn: float = 3.0
    collusion_trigger: float = 2.0
    collusion_cap: float = 20.0
    kappa_max: float = 10.0

    def __post_init__(self):
        if min(self.w_f1, self.w_step, self.w_fn) < 0:
            raise ValueError("reward weights must be nonnegative")


def collusion_score(tau_honest_mean: float, tau_malicious_mean: float, kappa_max: float = 10.0) -> float:
    """kappa = 1/|gap|, capped at kappa_max (the cap also covers the singularity)."""
    gap = abs(tau_honest_mean - tau_malicious_mean)
    if gap < 1.0 / kappa_max:
        return kappa_max
    return min(1.0 / gap, kappa_max)


def compute_reward(cm: metrics.ConfusionMatrix, r_step: float, kappa: float, cfg: RewardConfig) -> float:
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    reward = cfg.w_f1 * metrics.f1(cm) * 100.0
    reward += cfg.w_step * r_step / 100.0
    reward -= cfg.w_fn * cm.fn
    if kappa > cfg.collusion_trigger:
        reward -= min(kappa * 2.0, cfg.collusion_cap)
    return reward


def _skewness(values: np.ndarray, mean: float, var: float) -> float:
    # Fisher sample skewness g1 = m3 / m2^(3/2); defined as 0 for a flat sample
    if var <= 0.0:
        return 0.0
    centered = values - values.mean()
    m2 = float((centered**2).mean())
    m3 = float((centered**3).mean())
    if m2 <= 0.0:
        return 0.0
    return m3 / m2**1.5


def extract_state(
    net: NetworkState,
    history: "History",
    kappa_max: float = 10.0,
    corruption: dict | None = None,
    steps_per_episode: int = 100,
    batch_size: int = 10,
) -> np.ndarray:
    """Build the 16-feature observation from the current network view."""
    taus = net.trust_scores()
    if corruption:
        taus = taus.copy()
        for node, value in corruption.items():
            taus[node] = value

    mean = float(taus.mean())
    var = float(taus.var(ddof=1)) if len(taus) > 1 else 0.0
    skew = _skewness(taus, mean, var)
    median = float(np.median(taus))
    spread = float(taus.max() - taus.min())
    q25, q75 = np.percentile(taus, [25.0, 75.0], method="linear")
    iqr = float(q75 - q25)
    cv = float(np.sqrt(var) / mean) if mean > 0.0 else 0.0

    tx_cap = float(steps_per_episode * batch_size)
    verified_norm = float(np.clip(net.verified_tx_total / tx_cap, 0.0, 1.0)) if tx_cap else 0.0
    chain_norm = float(np.clip(net.chain_length / steps_per_episode, 0.0, 1.0))

    mal = net.malicious_mask
    n_mal = int(mal.sum())
    hm_ratio = float((len(taus) - n_mal) / max(1, n_mal))

    low_frac = float((taus < LOW_TRUST_CUTOFF).mean())
    high_frac = float((taus > HIGH_TRUST_CUTOFF).mean())

    # the delegation policy's committee fraction: the observable image of
    # the controlled variable (k/N under the current ratio)
    deleg_eff = max(1, round_half_up(net.delegation_ratio * net.n)) / max(1, net.n)

    window = max(1, len(history.blocks))
    throughput_rate = float(sum(history.verified) / (window * batch_size)) if history.verified else 0.0
    block_rate = float(sum(history.blocks) / window) if history.blocks else 0.0

    true_taus = net.trust_scores()
    honest = net.honest_indices()
    malicious = net.malicious_indices()
    if len(honest) and len(malicious):
        kappa = collusion_score(float(true_taus[honest].mean()), float(true_taus[malicious].mean()), kappa_max)
    else:
        kappa = 0.0

    state = np.array(
        [
            mean,
            var,
            skew,
            median,
            spread,
            iqr,
            cv,
            verified_norm,
            chain_norm,
            hm_ratio,
            low_frac,
            high_frac,
            deleg_eff,
            throughput_rate,
            block_rate,
            kappa,
        ]
    )
    if not np.all(np.isfinite(state)):
        raise FloatingPointError(f"non-finite state features: {state}")
    return state


class History:
    """Sliding operational window feeding the rate features."""

    def __init__(self, window: int = HISTORY_WINDOW):
        self.window = window
        self.blocks: deque = deque(maxlen=window)
        self.verified: deque = deque(maxlen=window)
        self.last_verified = 0
        self.last_delegate_count = 0

    def push(self, block_created: bool, verified: int, delegate_count: int) -> None:
        self.blocks.append(1 if block_created else 0)
        self.verified.append(verified)
        self.last_verified = verified
        self.last_delegate_count = delegate_count


@dataclass
class EnvConfig:
    steps_per_episode: int = 100
    batch_size: int = 10
    theta: float = 0.45
    detect_p: float = 0.6
    kappa_max: float = 10.0


class SimulationError(RuntimeError):
    pass


class Environment:
    """One seeded simulation instance; owns the network, gate and attack."""

    def __init__(
        self,
        net: NetworkState,
        attack: Attack | None,
        gate: PolicyGate,
        update_cfg: TrustUpdateConfig,
        reward_cfg: RewardConfig,
        env_cfg: EnvConfig,
        rng_consensus: np.random.Generator,
        rng_attack: np.random.Generator,
        evidence_log: list | None = None,
    ):
        self.net = net
        self.attack = attack
        self.gate = gate
        self.update_cfg = update_cfg
        self.reward_cfg = reward_cfg
        self.cfg = env_cfg
        self.rng_consensus = rng_consensus
        self.rng_attack = rng_attack
        self.evidence_log = evidence_log
        self.history = History()
        self.pending_conflicting: set = set()
        self.pending_corruption: dict = {}
        self.kappas: list[float] = []
        self.rewards: list[float] = []
        self.step_f1: list[float] = []

    def begin_episode(self, episode_index: int) -> None:
        self.net.episode_index = episode_index
        self.history = History()
        self.pending_conflicting = set()
        self.pending_corruption = {}
        self.kappas = []
        self.rewards = []
        self.step_f1 = []

    def observe(self) -> np.ndarray:
        return extract_state(
            self.net,
            self.history,
            kappa_max=self.reward_cfg.kappa_max,
            corruption=self.pending_corruption,
            steps_per_episode=self.cfg.steps_per_episode,
            batch_size=self.cfg.batch_size,
        )

    def step(self, action: Action) -> tuple[float, dict]:
        net = self.net
        net.delegation_ratio = apply_action(net.delegation_ratio, action)

        taus = net.trust_scores()
        accepted = self.gate.accepted(taus)

        policy = DelegationPolicy(ratio=net.delegation_ratio, node_count=net.n)
        k = min(policy.committee_size, len(accepted))
        net.pending_tx = self.cfg.batch_size
        outcome = None
        if k > 0:
            delegates = sample_top_k(net.alphas, net.betas, k, self.rng_consensus, candidates=accepted)
            vote_overrides = self.attack.vote_overrides(net) if self.attack else {}
            outcome = run_consensus_round(
                net,
                delegates,
                self.rng_consensus,
                self.update_cfg,
                vote_overrides=vote_overrides,
                conflicting=self.pending_conflicting,
                detect_p=self.cfg.detect_p,
                batch_size=self.cfg.batch_size,
                evidence_log=self.evidence_log,
            )
        self.pending_conflicting = set()

        if self.attack is not None:
            effects = self.attack.step(net, self.rng_attack)
            apply_perturbations(
                net, effects.perturbations, accepted=set(int(i) for i in accepted), evidence_log=self.evidence_log
            )
            self.pending_conflicting = effects.conflicting
            self.pending_corruption = effects.corruption
        else:
            self.pending_corruption = {}

        block = outcome.block_created if outcome else False
        verified = outcome.verified_tx if outcome else 0
        if block:
            net.pending_tx = 0
        self.history.push(block, verified, k)

        true_taus = net.trust_scores()
        cm = metrics.classify(true_taus, net.malicious_mask, self.cfg.theta)
        honest = net.honest_indices()
        malicious = net.malicious_indices()
        if len(honest) and len(malicious):
            kappa = collusion_score(
                float(true_taus[honest].mean()),
                float(true_taus[malicious].mean()),
                self.reward_cfg.kappa_max,
            )
        else:
            kappa = 0.0
        r_step = 10.0 * (verified / self.cfg.batch_size) + 50.0 * (1.0 if block else 0.0)
        reward = compute_reward(cm, r_step, kappa, self.reward_cfg)
        if not np.isfinite(reward):
            raise SimulationError(f"non-finite reward at step {net.step_index}: {reward}")

        self.kappas.append(kappa)
        self.rewards.append(reward)
        self.step_f1.append(metrics.f1(cm))
        net.step_index += 1
        return reward, {"confusion": cm, "kappa": kappa, "block": block, "verified": verified}


def run_episode(
    env: Environment,
    agent,
    episode_index: int,
    steps: int | None = None,
    terminal_at_end: bool = False,
) -> metrics.EpisodeRecord:
    """Run one episode and return its aggregate record.

    Episodes are evaluation windows over a continuing process, so by
    default no step is marked terminal: value bootstrapping may carry
    credit for end-of-episode policy state into the next window.
    """
    if steps is None:
        steps = env.cfg.steps_per_episode
    if steps < 1:
        raise ValueError("steps must be positive")
    env.begin_episode(episode_index)
    agent.begin_episode(episode_index)

    state = env.observe()
    for t in range(steps):
        action = agent.act(state)
        reward, _ = env.step(Action(action))
        next_state = env.observe()
        terminal = terminal_at_end and t == steps - 1
        agent.observe(state, int(action), reward, next_state, terminal=terminal)
        state = next_state
    agent.end_episode()

    net = env.net
    cm = metrics.classify(net.trust_scores(), net.malicious_mask, env.cfg.theta)
    return metrics.EpisodeRecord(
        episode=episode_index,
        cumulative_reward=float(sum(env.rewards)),
        confusion=cm,
        f1=metrics.f1(cm),
        precision=metrics.precision(cm),
        recall=metrics.recall(cm),
        throughput=net.verified_tx_total,
        chain_length=net.chain_length,
        mean_kappa=float(np.mean(env.kappas)) if env.kappas else 0.0,
        trust_separation=trust_separation(net) if len(net.malicious_indices()) else 0.0,
        delegation_ratio=net.delegation_ratio,
        step_f1=list(env.step_f1),
    )
