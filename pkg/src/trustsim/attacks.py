"""The five adversary families as seedable state machines.

Attacks never write trust scores directly.  Every trust effect is emitted
as a perturbation in evidence space (alpha boosts, beta penalties), so the
Beta-profile invariants survive any attack schedule.  Vote manipulation
and observation corruption travel on separate channels: MARK_CONFLICTING
flags a node to equivocate in the next consensus round, and
CORRUPT_OBSERVATION replaces one node's contribution to the agent's state
features without touching actual trust.

Families:

* NMA  - independent per-node noise: random beta penalties against honest
  nodes with probability p_attack.
* CRA  - periodic coalition action: mutual alpha inflation plus coordinated
  beta strikes on the top honest nodes.
* AAA  - epsilon-greedy rotation over five strategy templates with success
  tracking on the change in mean malicious trust.
* BFI  - equivocation, sybil-amplified endorsements, a standing eclipse
  target, periodic coordinated strikes, and phase switching
  (AGGRESSIVE / STRATEGIC / RECOVERY) on coalition trust.
* TDP  - sleepers stay inert until the activation episode, then hammer the
  top honest nodes every step while boosting each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkState, Vote

FAMILIES = ("nma", "cra", "aaa", "bfi", "tdp")

AAA_STRATEGIES = (
    "gradient_exploitation",
    "slow_poisoning",
    "strategic_cooperation",
    "mimicry",
    "temporal_coordination",
)


@dataclass(frozen=True)
class AttackConfig:
    family: str = "nma"
    base_evidence: float = 1.0
    # NMA
    nma_p_attack: float = 0.5
    nma_noise: float = 0.5
    # CRA
    cra_intensity: float = 0.85
    cra_period: int = 2
    cra_target_fraction: float = 0.25
    # AAA
    aaa_strategy_count: int = 5
    aaa_eps_start: float = 1.0
    aaa_eps_decay: float = 0.98
    aaa_factor: float = 0.12
    aaa_burst_period: int = 10
    # BFI
    bfi_equivocation_rate: float = 0.90
    bfi_recovery_equivocation_rate: float = 0.2
    bfi_sybil_k: int = 4
    bfi_window: int = 6
    bfi_low_trust: float = 0.4
    bfi_high_trust: float = 0.6
    bfi_endorsement_base: float = 0.05
    bfi_strike_magnitude: float = 0.3
    # TDP
    tdp_activation_episode: int = 25
    tdp_intensity: float = 0.75
    tdp_target_ratio: float = 0.35

    def __post_init__(self):
        if self.family not in FAMILIES and self.family != "none":
            raise ValueError(f"unknown attack family {self.family!r}")
        for name in (
            "nma_p_attack",
            "cra_intensity",
            "cra_target_fraction",
            "bfi_equivocation_rate",
            "bfi_recovery_equivocation_rate",
            "tdp_intensity",
            "tdp_target_ratio",
        ):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.cra_period < 1 or self.bfi_window < 1 or self.aaa_burst_period < 1:
            raise ValueError("periods and windows must be >= 1")
        if not (1 <= self.aaa_strategy_count <= len(AAA_STRATEGIES)):
            raise ValueError(f"aaa_strategy_count must lie in [1, {len(AAA_STRATEGIES)}]")


class PerturbationKind(enum.Enum):
    BOOST_ALPHA = "boost_alpha"
    PENALIZE_BETA = "penalize_beta"
    MARK_CONFLICTING = "mark_conflicting"
    CORRUPT_OBSERVATION = "corrupt_observation"


@dataclass(frozen=True)
class Perturbation:
    """One evidence-space injection.

    ``emitters`` names the adversary nodes whose falsified feedback the
    magnitude aggregates.  The access layer refuses feedback transactions
    from gate-rejected nodes, so at application time the magnitude scales
    with the fraction of emitters currently holding access; ``None`` marks
    behavioral self-effects that carry no refusable transaction.
    """

    target: int
    kind: PerturbationKind
    magnitude: float = 1.0
    feature_mask: dict | None = None
    emitters: tuple | None = None

    def __post_init__(self):
        if self.magnitude <= 0.0:
            raise ValueError("perturbation magnitude must be positive")
        if self.kind is PerturbationKind.CORRUPT_OBSERVATION and self.feature_mask is None:
            raise ValueError("observation corruption needs a feature mask")


@dataclass
class AttackState:
    family: str
    # AAA memory
    aaa_scores: np.ndarray = field(default_factory=lambda: np.zeros(len(AAA_STRATEGIES)))
    aaa_eps: float = 1.0
    aaa_prev_strategy: int | None = None
    aaa_prev_mean_trust: float | None = None
    # BFI memory
    bfi_phase: str = "STRATEGIC"
    bfi_eclipse_target: int | None = None
    bfi_endorse_cursor: int = 0
    # TDP memory
    tdp_activated: bool = False
    tdp_targets: tuple = ()


def new_state(cfg: AttackConfig) -> AttackState:
    return AttackState(family=cfg.family, aaa_eps=cfg.aaa_eps_start)


def _top_trust(net: NetworkState, indices: np.ndarray, count: int) -> list[int]:
    """The `count` highest-trust nodes among `indices`; ties break on index."""
    taus = net.trust_scores()
    order = sorted(indices, key=lambda i: (-taus[i], i))
    return [int(i) for i in order[:count]]


def amplified_endorsement(cfg: AttackConfig, magnitude: float) -> float:
    """Sybil amplification: endorsement evidence from a Byzantine node counts k-fold."""
    return magnitude * cfg.bfi_sybil_k


# --- NMA ---------------------------------------------------------------------


def nma_step(cfg: AttackConfig, state: AttackState, net: NetworkState, rng) -> list[Perturbation]:
    honest = net.honest_indices()
    perts: list[Perturbation] = []
    if len(honest) == 0:
        return perts
    for m in net.malicious_indices():
        if cfg.nma_p_attack > 0.0 and rng.random() < cfg.nma_p_attack:
            target = int(honest[rng.integers(len(honest))])
            perts.append(
                Perturbation(
                    target,
                    PerturbationKind.PENALIZE_BETA,
                    cfg.nma_noise * cfg.base_evidence,
                    emitters=(int(m),),
                )
            )
    return perts


# --- CRA ---------------------------------------------------------------------


def cra_step(cfg: AttackConfig, state: AttackState, net: NetworkState, rng) -> list[Perturbation]:
    if net.step_index % cfg.cra_period != 0:
        return []
    malicious = net.malicious_indices()
    honest = net.honest_indices()
    m = len(malicious)
    if m == 0:
        return []
    perts = []
    all_mal = tuple(int(i) for i in malicious)
    boost = (m - 1) * cfg.cra_intensity * cfg.base_evidence
    if boost > 0.0:
        for node in malicious:
            peers = tuple(i for i in all_mal if i != int(node))
            perts.append(Perturbation(int(node), PerturbationKind.BOOST_ALPHA, boost, emitters=peers))
    n_targets = int(np.ceil(cfg.cra_target_fraction * len(honest)))
    penalty = m * cfg.cra_intensity * cfg.base_evidence
    for h in _top_trust(net, honest, n_targets):
        perts.append(Perturbation(h, PerturbationKind.PENALIZE_BETA, penalty, emitters=all_mal))
    return perts


# --- AAA ---------------------------------------------------------------------


def _aaa_apply_strategy(
    cfg: AttackConfig, strategy: int, net: NetworkState, rng
) -> list[Perturbation]:
    malicious = net.malicious_indices()
    honest = net.honest_indices()
    m = len(malicious)
    taus = net.trust_scores()
    f = cfg.aaa_factor * cfg.base_evidence
    coalition_boost = (m - 1) * f
    strike = m * f
    perts: list[Perturbation] = []
    all_mal = tuple(int(i) for i in malicious)
    name = AAA_STRATEGIES[strategy]

    if name == "gradient_exploitation":
        # ride the update dynamics: rebuild when low, spend trust on strikes
        # when high; the rebuild is behavioral (not a refusable transaction)
        for node in malicious:
            if taus[node] < 0.5:
                if coalition_boost > 0:
                    perts.append(Perturbation(int(node), PerturbationKind.BOOST_ALPHA, coalition_boost))
            elif len(honest):
                target = int(honest[rng.integers(len(honest))])
                perts.append(
                    Perturbation(target, PerturbationKind.PENALIZE_BETA, strike, emitters=(int(node),))
                )
    elif name == "slow_poisoning":
        # imperceptible drip on every honest node; per-perturbation magnitude <= factor
        for h in honest:
            perts.append(Perturbation(int(h), PerturbationKind.PENALIZE_BETA, f, emitters=all_mal))
    elif name == "strategic_cooperation":
        if coalition_boost > 0:
            for node in malicious:
                peers = tuple(i for i in all_mal if i != int(node))
                perts.append(
                    Perturbation(int(node), PerturbationKind.BOOST_ALPHA, coalition_boost, emitters=peers)
                )
    elif name == "mimicry":
        # behavioral imitation of the top honest node; no transaction to refuse
        if len(honest):
            top = _top_trust(net, honest, 1)[0]
            for node in malicious:
                if taus[node] < taus[top] and coalition_boost > 0:
                    perts.append(Perturbation(int(node), PerturbationKind.BOOST_ALPHA, coalition_boost))
    elif name == "temporal_coordination":
        if net.step_index % cfg.aaa_burst_period == 0 and len(honest):
            top = _top_trust(net, honest, 1)[0]
            for node in malicious:
                peers = tuple(i for i in all_mal if i != int(node))
                perts.append(Perturbation(top, PerturbationKind.PENALIZE_BETA, strike, emitters=all_mal))
                if coalition_boost > 0:
                    perts.append(
                        Perturbation(int(node), PerturbationKind.BOOST_ALPHA, coalition_boost, emitters=peers)
                    )
    return perts


def aaa_step(
    cfg: AttackConfig, state: AttackState, net: NetworkState, rng
) -> tuple[list[Perturbation], AttackState]:
    malicious = net.malicious_indices()
    if len(malicious) == 0:
        return [], state
    mean_now = float(net.trust_scores()[malicious].mean())
    if state.aaa_prev_strategy is not None:
        delta = mean_now - state.aaa_prev_mean_trust
        prev = state.aaa_prev_strategy
        state.aaa_scores[prev] = 0.8 * state.aaa_scores[prev] + 0.2 * delta

    n_strategies = cfg.aaa_strategy_count
    if rng.random() < state.aaa_eps:
        strategy = int(rng.integers(n_strategies))
    else:
        strategy = int(np.argmax(state.aaa_scores[:n_strategies]))
    state.aaa_eps = state.aaa_eps * cfg.aaa_eps_decay

    perts = _aaa_apply_strategy(cfg, strategy, net, rng)
    state.aaa_prev_strategy = strategy
    state.aaa_prev_mean_trust = mean_now
    return perts, state


# --- BFI ---------------------------------------------------------------------


def bfi_step(
    cfg: AttackConfig, state: AttackState, net: NetworkState, rng
) -> tuple[list[Perturbation], AttackState]:
    byz = net.malicious_indices()
    honest = net.honest_indices()
    if len(byz) == 0:
        return [], state
    taus = net.trust_scores()

    if state.bfi_eclipse_target is None and len(honest):
        state.bfi_eclipse_target = int(honest[rng.integers(len(honest))])

    mean_byz = float(taus[byz].mean())
    if mean_byz > cfg.bfi_high_trust:
        state.bfi_phase = "AGGRESSIVE"
    elif mean_byz < cfg.bfi_low_trust:
        state.bfi_phase = "RECOVERY"
    else:
        state.bfi_phase = "STRATEGIC"

    rate = (
        cfg.bfi_recovery_equivocation_rate if state.bfi_phase == "RECOVERY" else cfg.bfi_equivocation_rate
    )

    perts: list[Perturbation] = []
    for b in byz:
        if rng.random() < rate:
            perts.append(Perturbation(int(b), PerturbationKind.MARK_CONFLICTING, 1.0))

    # coalition endorsements only while lying low; each endorsement is
    # sybil-amplified because the k virtual identities co-sign it
    if state.bfi_phase == "RECOVERY" and len(byz) > 1 and cfg.bfi_endorsement_base > 0.0:
        magnitude = amplified_endorsement(cfg, cfg.bfi_endorsement_base * cfg.base_evidence)
        m = len(byz)
        shift = 1 + state.bfi_endorse_cursor % (m - 1)  # ring offset, never self
        for j in range(m):
            peer = int(byz[(j + shift) % m])
            perts.append(
                Perturbation(peer, PerturbationKind.BOOST_ALPHA, magnitude, emitters=(int(byz[j]),))
            )
        state.bfi_endorse_cursor += 1

    if net.step_index % cfg.bfi_window == 0 and len(honest):
        top = _top_trust(net, honest, 1)[0]
        for b in byz:
            perts.append(
                Perturbation(
                    top,
                    PerturbationKind.PENALIZE_BETA,
                    cfg.bfi_strike_magnitude * cfg.base_evidence,
                    emitters=(int(b),),
                )
            )

    if state.bfi_eclipse_target is not None:
        target = state.bfi_eclipse_target
        fake = float(np.clip(1.0 - taus[target], 0.01, 0.99))
        perts.append(
            Perturbation(
                target,
                PerturbationKind.CORRUPT_OBSERVATION,
                1.0,
                feature_mask={"trust_value": fake},
            )
        )
    return perts, state


# --- TDP ---------------------------------------------------------------------


def tdp_step(
    cfg: AttackConfig, state: AttackState, net: NetworkState, rng
) -> tuple[list[Perturbation], AttackState]:
    if net.episode_index >= cfg.tdp_activation_episode:
        state.tdp_activated = True  # monotone: never cleared
    if not state.tdp_activated:
        # dormant sleepers add nothing to the evidence stream: a dormant-phase
        # run is indistinguishable from one with no attack attached
        return [], state

    sleepers = net.malicious_indices()
    honest = net.honest_indices()
    m = len(sleepers)
    if m == 0:
        return [], state
    perts: list[Perturbation] = []

    all_sleepers = tuple(int(i) for i in sleepers)
    n_targets = int(np.ceil(cfg.tdp_target_ratio * len(honest)))
    penalty = m * cfg.tdp_intensity * cfg.base_evidence
    targets = tuple(_top_trust(net, honest, n_targets))
    state.tdp_targets = targets
    for h in targets:
        perts.append(Perturbation(h, PerturbationKind.PENALIZE_BETA, penalty, emitters=all_sleepers))

    boost = (m - 1) * cfg.tdp_intensity * cfg.base_evidence
    if boost > 0.0:
        for s in sleepers:
            peers = tuple(i for i in all_sleepers if i != int(s))
            perts.append(Perturbation(int(s), PerturbationKind.BOOST_ALPHA, boost, emitters=peers))
    return perts, state


# --- driver used by the environment ------------------------------------------


@dataclass
class StepEffects:
    perturbations: list
    conflicting: set
    corruption: dict
    vote_overrides: dict


class Attack:
    """Binds a family's config and memory; one instance per simulation run."""

    def __init__(self, cfg: AttackConfig):
        self.cfg = cfg
        self.state = new_state(cfg)

    def step(self, net: NetworkState, rng) -> StepEffects:
        cfg = self.cfg
        if cfg.family == "nma":
            perts = nma_step(cfg, self.state, net, rng)
        elif cfg.family == "cra":
            perts = cra_step(cfg, self.state, net, rng)
        elif cfg.family == "aaa":
            perts, self.state = aaa_step(cfg, self.state, net, rng)
        elif cfg.family == "bfi":
            perts, self.state = bfi_step(cfg, self.state, net, rng)
        elif cfg.family == "tdp":
            perts, self.state = tdp_step(cfg, self.state, net, rng)
        else:
            perts = []

        conflicting = set()
        corruption = {}
        evidence = []
        for p in perts:
            if p.kind is PerturbationKind.MARK_CONFLICTING:
                conflicting.add(p.target)
            elif p.kind is PerturbationKind.CORRUPT_OBSERVATION:
                corruption[p.target] = p.feature_mask["trust_value"]
            else:
                evidence.append(p)
        return StepEffects(
            perturbations=evidence,
            conflicting=conflicting,
            corruption=corruption,
            vote_overrides=self.vote_overrides(net),
        )

    def vote_overrides(self, net: NetworkState) -> dict:
        """Consensus vote behavior beyond the Invalid default.

        Activated sleepers pose as honest validators (vote Valid) while the
        out-of-band perturbations do the damage.
        """
        if self.cfg.family == "tdp" and self.state.tdp_activated:
            return {int(i): Vote.VALID for i in net.malicious_indices()}
        return {}


def apply_perturbations(net: NetworkState, perturbations, accepted=None, evidence_log=None) -> None:
    """Fold evidence-space perturbations into the trust profiles.

    When an ``accepted`` set is given, each perturbation's magnitude scales
    with the fraction of its emitters holding access: the gate refuses
    feedback transactions from rejected nodes.  Emitter-less perturbations
    (behavioral effects) always apply in full.
    """
    for p in perturbations:
        magnitude = p.magnitude
        if accepted is not None and p.emitters is not None:
            live = sum(1 for e in p.emitters if e in accepted)
            if live == 0:
                continue
            magnitude = p.magnitude * (live / len(p.emitters))
        if p.kind is PerturbationKind.BOOST_ALPHA:
            net.alphas[p.target] += magnitude
        elif p.kind is PerturbationKind.PENALIZE_BETA:
            net.betas[p.target] += magnitude
        else:
            raise ValueError(f"{p.kind} is not evidence-space")
        if evidence_log is not None:
            evidence_log.append(
                (net.episode_index, net.step_index, "attack", p.target, f"{p.kind.value}:{magnitude:.6f}")
            )
