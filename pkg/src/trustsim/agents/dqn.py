"""Dueling Double DQN defense agent."""

from __future__ import annotations

import numpy as np

from ..env import N_ACTIONS, STATE_DIM
from .nn import (
    Adam,
    AgentHyperparams,
    DuelingNetwork,
    ReplayBuffer,
    epsilon_greedy,
    sync_target,
    train_step,
)


class DqnAgent:
    """Single learning agent: replay, double-Q targets, periodic target sync."""

    kind = "dqn"

    def __init__(
        self,
        hp: AgentHyperparams,
        rng: np.random.Generator,
        episodes_total: int = 50,
        state_dim: int = STATE_DIM,
        n_actions: int = N_ACTIONS,
    ):
        self.hp = hp
        self.rng = rng
        self.online = DuelingNetwork(state_dim, hp.hidden_sizes, hp.head_hidden, n_actions, rng)
        self.target = self.online.clone()
        self.optimizer = Adam(self.online.parameters(), lr=hp.learning_rate)
        self.buffer = ReplayBuffer(hp.buffer_capacity, state_dim)
        self.eps = hp.eps_start
        self._decay = hp.episode_eps_decay(episodes_total)
        self.total_steps = 0
        self.train_skips = 0
        self.last_loss: float | None = None

    def begin_episode(self, episode_index: int) -> None:
        pass

    def act(self, state: np.ndarray) -> int:
        return epsilon_greedy(self.online.forward(state), self.eps, self.rng)

    def observe(self, state, action, reward, next_state, terminal: bool) -> None:
        self.buffer.push(state, action, reward * self.hp.reward_scale, next_state, terminal)
        self.total_steps += 1
        loss = train_step(self.online, self.target, self.buffer, self.optimizer, self.hp, self.rng)
        if loss is None:
            self.train_skips += 1
        else:
            self.last_loss = loss
        if self.total_steps % self.hp.target_sync_every == 0:
            sync_target(self.online, self.target)

    def end_episode(self) -> None:
        self.eps = max(self.hp.eps_min, self.eps * self._decay)

    def qvalues(self, state: np.ndarray) -> np.ndarray:
        return self.online.forward(state)
