"""Internal neural substrate: a dueling MLP with explicit forward/backward.

The topology is small and fixed (trunk 16->128->64, value head 64->32->1,
advantage head 64->32->3 by default), so the network is implemented
directly on numpy arrays with an adaptive-moment optimizer rather than
pulling in an ML framework.  The elementwise-heavy kernels route through
``trustsim._kernels`` and pick up the numba path when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels

K = _kernels.ACTIVE


@dataclass(frozen=True)
class AgentHyperparams:
    learning_rate: float = 5e-4
    tabular_learning_rate: float = 0.1
    discount: float = 0.99
    eps_start: float = 1.0
    eps_min: float = 0.05
    eps_decay: float | None = None  # per-episode factor; derived from episode count when None
    buffer_capacity: int = 10_000
    batch_size: int = 64
    hidden_sizes: tuple = (128, 64)
    head_hidden: int = 32
    target_sync_every: int = 100
    marl_sync_every: int = 10
    td_clip: float | None = 10.0
    # deep agents regress on scaled rewards so Q magnitudes stay inside the
    # clip regime; the environment reward itself is untouched
    reward_scale: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must lie in (0, 1]")
        if self.eps_min > self.eps_start:
            raise ValueError("eps_min must not exceed eps_start")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size must not exceed buffer_capacity")

    def episode_eps_decay(self, episodes: int) -> float:
        """Factor so epsilon reaches eps_min at 80% of the episode budget."""
        if self.eps_decay is not None:
            return self.eps_decay
        horizon = max(1, int(round(0.8 * episodes)))
        return (self.eps_min / self.eps_start) ** (1.0 / horizon)


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class DuelingNetwork:
    """Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a'), with ReLU activations."""

    def __init__(
        self,
        input_dim: int = 16,
        hidden_sizes: tuple = (128, 64),
        head_hidden: int = 32,
        n_actions: int = 3,
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            rng = np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden_sizes = tuple(hidden_sizes)
        self.head_hidden = head_hidden
        self.n_actions = n_actions

        self.trunk_w = []
        self.trunk_b = []
        prev = input_dim
        for h in self.hidden_sizes:
            self.trunk_w.append(glorot_uniform(prev, h, rng))
            self.trunk_b.append(np.zeros(h))
            prev = h
        self.vw0 = glorot_uniform(prev, head_hidden, rng)
        self.vb0 = np.zeros(head_hidden)
        self.vw1 = glorot_uniform(head_hidden, 1, rng)
        self.vb1 = np.zeros(1)
        self.aw0 = glorot_uniform(prev, head_hidden, rng)
        self.ab0 = np.zeros(head_hidden)
        self.aw1 = glorot_uniform(head_hidden, n_actions, rng)
        self.ab1 = np.zeros(n_actions)

    # parameter order is the declared checkpoint order
    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            params.extend([w, b])
        params.extend([self.vw0, self.vb0, self.vw1, self.vb1])
        params.extend([self.aw0, self.ab0, self.aw1, self.ab1])
        return params

    def parameter_names(self) -> list[str]:
        names = []
        for i in range(len(self.trunk_w)):
            names.extend([f"trunk_w{i}", f"trunk_b{i}"])
        names.extend(["value_w0", "value_b0", "value_w1", "value_b1"])
        names.extend(["adv_w0", "adv_b0", "adv_w1", "adv_b1"])
        return names

    def topology(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "head_hidden": self.head_hidden,
            "n_actions": self.n_actions,
        }

    def copy_from(self, other: "DuelingNetwork") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            np.copyto(dst, src)

    def clone(self) -> "DuelingNetwork":
        twin = DuelingNetwork(self.input_dim, self.hidden_sizes, self.head_hidden, self.n_actions)
        twin.copy_from(self)
        return twin

    def _forward(self, x: np.ndarray, keep_cache: bool):
        cache = {"x": x, "trunk": []} if keep_cache else None
        h = x
        for w, b in zip(self.trunk_w, self.trunk_b):
            h = K.dense_relu_forward(h, w, b)
            if keep_cache:
                cache["trunk"].append(h)
        vh = K.dense_relu_forward(h, self.vw0, self.vb0)
        v = K.dense_forward(vh, self.vw1, self.vb1)
        ah = K.dense_relu_forward(h, self.aw0, self.ab0)
        a = K.dense_forward(ah, self.aw1, self.ab1)
        q = v + a - a.mean(axis=1, keepdims=True)
        if keep_cache:
            cache["vh"] = vh
            cache["ah"] = ah
        return q, cache

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Batch of states -> batch of Q rows. Raises on non-finite output."""
        single = x.ndim == 1
        if single:
            x = x[None, :]
        q, _ = self._forward(x, keep_cache=False)
        if not np.all(np.isfinite(q)):
            raise FloatingPointError("non-finite activations in Q forward pass")
        return q[0] if single else q

    def forward_cached(self, x: np.ndarray):
        q, cache = self._forward(x, keep_cache=True)
        if not np.all(np.isfinite(q)):
            raise FloatingPointError("non-finite activations in Q forward pass")
        return q, cache

    def backward(self, cache: dict, dq: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss wrt parameters, given dL/dQ.

        Returns arrays in the same order as ``parameters()``.
        """
        # combine layer: q_ij = v_i + a_ij - mean_j' a_ij'
        da = dq - dq.mean(axis=1, keepdims=True)
        dv = dq.sum(axis=1, keepdims=True)

        h_last = cache["trunk"][-1] if cache["trunk"] else cache["x"]

        # value head
        d_vw1 = K.grad_weights(cache["vh"], dv)
        d_vb1 = K.colsum(dv)
        dvh = K.relu_backward(K.grad_input(dv, self.vw1), cache["vh"])
        d_vw0 = K.grad_weights(h_last, dvh)
        d_vb0 = K.colsum(dvh)

        # advantage head
        d_aw1 = K.grad_weights(cache["ah"], da)
        d_ab1 = K.colsum(da)
        dah = K.relu_backward(K.grad_input(da, self.aw1), cache["ah"])
        d_aw0 = K.grad_weights(h_last, dah)
        d_ab0 = K.colsum(dah)

        dh = K.grad_input(dvh, self.vw0) + K.grad_input(dah, self.aw0)

        trunk_grads = []
        for i in range(len(self.trunk_w) - 1, -1, -1):
            z = cache["trunk"][i]
            dz = K.relu_backward(dh, z)
            prev = cache["trunk"][i - 1] if i > 0 else cache["x"]
            trunk_grads.append((K.grad_weights(prev, dz), K.colsum(dz)))
            if i > 0:
                dh = K.grad_input(dz, self.trunk_w[i])
        trunk_grads.reverse()

        grads = []
        for gw, gb in trunk_grads:
            grads.extend([gw, gb])
        grads.extend([d_vw0, d_vb0, d_vw1, d_vb1])
        grads.extend([d_aw0, d_ab0, d_aw1, d_ab1])
        return grads


class Adam:
    """Adaptive-moment optimizer with standard defaults and bias correction."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 5e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.size) for p in params]
        self.v = [np.zeros(p.size) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = self.beta1**self.t
        b2t = self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            K.adam_update(
                p.reshape(-1), g.reshape(-1), m, v, self.lr, self.beta1, self.beta2, self.eps, b1t, b2t
            )


def sync_target(net: DuelingNetwork, target_net: DuelingNetwork) -> DuelingNetwork:
    """Hard copy of online parameters into the target network."""
    target_net.copy_from(net)
    return target_net


def double_q_targets(
    rewards: np.ndarray,
    next_states: np.ndarray,
    terminals: np.ndarray,
    online: DuelingNetwork,
    target: DuelingNetwork,
    discount: float,
) -> np.ndarray:
    """Vectorized double-Q backup: online net picks, target net evaluates."""
    q_online = online.forward(next_states)
    a_star = np.argmax(q_online, axis=1)
    q_target = target.forward(next_states)
    boot = q_target[np.arange(len(a_star)), a_star]
    return rewards + discount * boot * (1.0 - terminals)


def double_q_target(
    r: float,
    s_next: np.ndarray,
    terminal: bool,
    online: DuelingNetwork,
    target: DuelingNetwork,
    discount: float,
) -> float:
    if terminal:
        return float(r)
    out = double_q_targets(
        np.array([r]), np.asarray(s_next)[None, :], np.array([0.0]), online, target, discount
    )
    return float(out[0])


def td_loss_and_grads(
    net: DuelingNetwork,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    td_clip: float | None,
):
    """Mean squared clipped TD error and its exact parameter gradients."""
    q, cache = net.forward_cached(states)
    rows = np.arange(len(actions))
    delta = q[rows, actions] - targets
    if td_clip is not None:
        clipped = np.clip(delta, -td_clip, td_clip)
        inside = (np.abs(delta) <= td_clip).astype(float)
    else:
        clipped = delta
        inside = np.ones_like(delta)
    loss = float(np.mean(clipped**2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * clipped * inside / len(actions)
    return loss, net.backward(cache, dq)


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform no-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminals = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a, r, s_next, terminal: bool) -> None:
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.terminals[i] = 1.0 if terminal else 0.0
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if batch > self.size:
            raise ValueError(f"cannot sample {batch} from buffer of size {self.size}")
        return rng.choice(self.size, size=batch, replace=False)

    def gather(self, idx: np.ndarray):
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminals[idx],
        )

    def sample(self, batch: int, rng: np.random.Generator):
        return self.gather(self.sample_indices(batch, rng))


def train_step(
    net: DuelingNetwork,
    target_net: DuelingNetwork,
    buffer: ReplayBuffer,
    optimizer: Adam,
    hp: AgentHyperparams,
    rng: np.random.Generator,
) -> float | None:
    """One sampled double-Q regression step; returns the loss, or None when
    the buffer cannot yet fill a batch (reported as a skip)."""
    if len(buffer) < hp.batch_size:
        return None
    states, actions, rewards, next_states, terminals = buffer.sample(hp.batch_size, rng)
    targets = double_q_targets(rewards, next_states, terminals, net, target_net, hp.discount)
    loss, grads = td_loss_and_grads(net, states, actions, targets, hp.td_clip)
    optimizer.step(grads)
    return loss


def epsilon_greedy(qvalues: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Explore uniformly with probability eps, else argmax (lowest index wins ties)."""
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must lie in [0, 1]")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(len(qvalues)))
    return int(np.argmax(qvalues))
