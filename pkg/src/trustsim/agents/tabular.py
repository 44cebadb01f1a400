"""Tabular Q-learning over a discretized observation space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import FEATURE_NAMES, N_ACTIONS
from .nn import AgentHyperparams, epsilon_greedy

# the three most informative features get the fine 10-bin grid
FINE_FEATURES = ("mean_trust", "variance", "collusion_score")
FINE_BINS = 10
COARSE_BINS = 5

# declared value range per feature, matched to the spans the simulation
# actually produces so the bins resolve structure; out-of-range values clamp
FEATURE_RANGES = {
    "mean_trust": (0.0, 1.0),
    "variance": (0.0, 0.1),
    "skewness": (-2.0, 2.0),
    "median": (0.0, 1.0),
    "range": (0.0, 0.8),
    "iqr": (0.0, 0.5),
    "coeff_variation": (0.0, 1.0),
    "verified_tx_norm": (0.0, 1.0),
    "chain_length_norm": (0.0, 1.0),
    "honest_malicious_ratio": (0.0, 16.0),
    "low_trust_frac": (0.0, 1.0),
    "high_trust_frac": (0.0, 1.0),
    "delegation_efficiency": (0.0, 1.0),
    "throughput_rate": (0.0, 1.0),
    "recent_block_rate": (0.0, 1.0),
    "collusion_score": (0.0, 10.0),
}


@dataclass(frozen=True)
class DiscretizationSpec:
    bins: tuple
    lows: tuple
    highs: tuple


def default_spec() -> DiscretizationSpec:
    bins, lows, highs = [], [], []
    for name in FEATURE_NAMES:
        bins.append(FINE_BINS if name in FINE_FEATURES else COARSE_BINS)
        lo, hi = FEATURE_RANGES[name]
        lows.append(lo)
        highs.append(hi)
    return DiscretizationSpec(tuple(bins), tuple(lows), tuple(highs))


def discretize_value(value: float, low: float, high: float, bins: int) -> int:
    """floor(clamped_fraction * bins), with the top edge assigned to the last bin."""
    frac = (value - low) / (high - low)
    frac = min(max(frac, 0.0), 1.0)
    return min(int(frac * bins), bins - 1)


def discretize(state: np.ndarray, spec: DiscretizationSpec) -> bytes:
    key = bytearray(len(state))
    for i, v in enumerate(state):
        key[i] = discretize_value(float(v), spec.lows[i], spec.highs[i], spec.bins[i])
    return bytes(key)


class QTable:
    """Sparse state-key -> action-values map; unseen keys read as zeros."""

    def __init__(self, n_actions: int = N_ACTIONS):
        self.n_actions = n_actions
        self.table: dict[bytes, np.ndarray] = {}

    def values(self, key: bytes) -> np.ndarray:
        row = self.table.get(key)
        return row if row is not None else np.zeros(self.n_actions)

    def row(self, key: bytes) -> np.ndarray:
        row = self.table.get(key)
        if row is None:
            row = np.zeros(self.n_actions)
            self.table[key] = row
        return row

    def __len__(self) -> int:
        return len(self.table)


def tabular_update(
    q: QTable, s_key: bytes, action: int, reward: float, s_next_key: bytes, hp: AgentHyperparams
) -> QTable:
    """Temporal-difference backup toward r + gamma * max_a' Q(s', a')."""
    row = q.row(s_key)
    best_next = float(np.max(q.values(s_next_key)))
    row[action] += hp.tabular_learning_rate * (reward + hp.discount * best_next - row[action])
    return q


class TabularAgent:
    """Epsilon-greedy tabular learner; epsilon decays once per episode."""

    kind = "tabular"

    def __init__(self, hp: AgentHyperparams, rng: np.random.Generator, episodes_total: int = 50):
        self.hp = hp
        self.rng = rng
        self.spec = default_spec()
        self.q = QTable()
        self.eps = hp.eps_start
        self._decay = hp.episode_eps_decay(episodes_total)

    def begin_episode(self, episode_index: int) -> None:
        pass

    def act(self, state: np.ndarray) -> int:
        key = discretize(state, self.spec)
        return epsilon_greedy(self.q.values(key), self.eps, self.rng)

    def observe(self, state, action, reward, next_state, terminal: bool) -> None:
        s_key = discretize(state, self.spec)
        n_key = discretize(next_state, self.spec)
        tabular_update(self.q, s_key, action, reward, n_key, self.hp)

    def end_episode(self) -> None:
        self.eps = max(self.hp.eps_min, self.eps * self._decay)

    def qvalues(self, state: np.ndarray) -> np.ndarray:
        return self.q.values(discretize(state, self.spec)).copy()
