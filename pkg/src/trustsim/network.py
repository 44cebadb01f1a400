"""The simulated network: node roster, consensus rounds, chain growth.

Ground truth is simple: every transaction batch offered to a round is
valid.  Honest delegates therefore vote Valid.  Malicious delegates vote
according to the active attack's behavior flags, defaulting to Invalid.
A block forms when Valid votes reach the 2/3 quorum, mirroring BFT
conventions.

Evidence rules per round:

* Valid voters in a successful round earn Valid evidence.
* Invalid and Conflicting voters are caught misbehaving with probability
  ``detect_p``; a caught vote draws Malicious evidence (beta increment plus
  multiplicative alpha decay), an uncaught one draws plain Invalid
  evidence.  Without the escalation path, coordinated alpha inflation
  outpaces any linear beta accrual and detection is impossible at any
  delegation ratio.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .trust import (
    EvidenceKind,
    TrustProfile,
    TrustUpdateConfig,
    apply_evidence,
    round_half_up,
)


class Vote(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    CONFLICTING = "conflicting"


@dataclass(frozen=True)
class NodeRole:
    malicious: bool
    attack_family: str | None = None


@dataclass
class NetworkState:
    alphas: np.ndarray
    betas: np.ndarray
    roles: list[NodeRole]
    delegation_ratio: float = 0.5
    pending_tx: int = 0
    chain_length: int = 0
    verified_tx_total: int = 0
    step_index: int = 0
    episode_index: int = 0

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def malicious_mask(self) -> np.ndarray:
        return np.array([r.malicious for r in self.roles], dtype=bool)

    def trust_scores(self) -> np.ndarray:
        return self.alphas / (self.alphas + self.betas)

    def profiles(self) -> list[TrustProfile]:
        return [TrustProfile(float(a), float(b)) for a, b in zip(self.alphas, self.betas)]

    def honest_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.malicious_mask)

    def malicious_indices(self) -> np.ndarray:
        return np.flatnonzero(self.malicious_mask)


@dataclass
class RoundOutcome:
    block_created: bool
    verified_tx: int
    delegate_votes: dict = field(default_factory=dict)


PRIOR_ALPHA = 8.0
PRIOR_BETA = 8.0
INIT_NOISE_SIGMA = 0.12
MIN_INIT_ALPHA = 0.5


def draw_profiles(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Beta(8, 8) priors with zero-mean Gaussian noise on alpha, clamped positive."""
    alphas = PRIOR_ALPHA + rng.normal(0.0, INIT_NOISE_SIGMA, size=n)
    alphas = np.maximum(alphas, MIN_INIT_ALPHA)
    betas = np.full(n, PRIOR_BETA)
    return alphas, betas


def init_network(
    n: int,
    malicious_ratio: float,
    rng: np.random.Generator,
    attack_family: str | None = None,
) -> NetworkState:
    if n < 2:
        raise ValueError(f"network needs at least 2 nodes, got {n}")
    if not (0.0 <= malicious_ratio <= 1.0):
        raise ValueError("malicious_ratio must lie in [0, 1]")
    alphas, betas = draw_profiles(n, rng)
    n_mal = round_half_up(malicious_ratio * n)
    mal_idx = set(int(i) for i in rng.choice(n, size=n_mal, replace=False)) if n_mal else set()
    roles = [
        NodeRole(malicious=i in mal_idx, attack_family=attack_family if i in mal_idx else None)
        for i in range(n)
    ]
    return NetworkState(alphas=alphas, betas=betas, roles=roles)


def reset_profiles(state: NetworkState, rng: np.random.Generator) -> None:
    """Fresh trust priors and counters for a new episode.

    Roles and the delegation ratio carry across episodes: roles are fixed
    for the run, and the ratio is the agent's policy variable, so a
    converged agent enters each episode at its preferred committee size.
    """
    state.alphas, state.betas = draw_profiles(state.n, rng)
    state.pending_tx = 0
    state.chain_length = 0
    state.verified_tx_total = 0
    state.step_index = 0


def quorum(n_delegates: int) -> int:
    """Votes required for a block: ceil(2/3 * committee size)."""
    return (2 * n_delegates + 2) // 3


def apply_node_evidence(
    state: NetworkState, node: int, kind: EvidenceKind, cfg: TrustUpdateConfig, log=None, source="consensus"
) -> None:
    updated = apply_evidence(
        TrustProfile(float(state.alphas[node]), float(state.betas[node])), kind, cfg
    )
    state.alphas[node] = updated.alpha
    state.betas[node] = updated.beta
    if log is not None:
        log.append((state.episode_index, state.step_index, source, node, kind.value))


def run_consensus_round(
    state: NetworkState,
    delegates,
    rng: np.random.Generator,
    update_cfg: TrustUpdateConfig,
    vote_overrides: dict | None = None,
    conflicting: set | None = None,
    detect_p: float = 0.5,
    batch_size: int = 10,
    evidence_log=None,
) -> RoundOutcome:
    """Run one voting round over the current transaction batch and apply evidence."""
    delegates = sorted(int(d) for d in delegates)
    if not delegates:
        raise ValueError("delegate set must be nonempty")
    if max(delegates) >= state.n:
        raise ValueError("delegate index out of range")

    vote_overrides = vote_overrides or {}
    conflicting = conflicting or set()

    votes: dict[int, Vote] = {}
    for d in delegates:
        if not state.roles[d].malicious:
            votes[d] = Vote.VALID
        elif d in conflicting:
            votes[d] = Vote.CONFLICTING
        else:
            votes[d] = vote_overrides.get(d, Vote.INVALID)

    n_valid = sum(1 for v in votes.values() if v is Vote.VALID)
    block = n_valid >= quorum(len(delegates))
    verified = batch_size if block else 0

    for d in delegates:
        v = votes[d]
        if v is Vote.VALID:
            if block:
                apply_node_evidence(state, d, EvidenceKind.VALID, update_cfg, evidence_log)
        else:
            caught = rng.random() < detect_p
            kind = EvidenceKind.MALICIOUS if caught else EvidenceKind.INVALID
            apply_node_evidence(state, d, kind, update_cfg, evidence_log)

    if block:
        state.chain_length += 1
        state.verified_tx_total += verified
    return RoundOutcome(block_created=block, verified_tx=verified, delegate_votes=votes)


def trust_separation(state: NetworkState) -> float:
    """Mean honest trust minus mean malicious trust (signed)."""
    honest = state.honest_indices()
    malicious = state.malicious_indices()
    if len(honest) == 0 or len(malicious) == 0:
        raise ValueError("trust separation needs at least one node of each role")
    taus = state.trust_scores()
    return float(taus[honest].mean() - taus[malicious].mean())
