"""Experiment orchestration: single runs, the agent-attack matrix, artifacts."""

from __future__ import annotations

import statistics
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels, metrics
from .abac import PolicyGate, load_policy
from .agents import make_agent, save_agent
from .attacks import Attack
from .charts import emit_charts
from .config import MATRIX_SEEDS, ConfigError, ExperimentConfig, manifest_lines
from .env import Environment, run_episode
from .network import init_network, reset_profiles


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def build_simulation(cfg: ExperimentConfig):
    """Construct the seeded network, gate, attack, agent, and environment."""
    episodes, warning = cfg.resolve_episodes()
    seq = np.random.SeedSequence(cfg.seed)
    rng_init, rng_reset, rng_consensus, rng_attack, rng_agent = (
        np.random.default_rng(child) for child in seq.spawn(5)
    )

    family = None if cfg.attack == "none" else cfg.attack
    net = init_network(cfg.n_nodes, cfg.malicious_ratio, rng_init, attack_family=family)
    attack = Attack(cfg.attack_cfg) if family else None

    policy = load_policy(cfg.policy_file) if cfg.policy_file else None
    gate = PolicyGate(policy=policy, mode=cfg.gate_mode)

    agent = make_agent(cfg.agent, cfg.hyper, rng_agent, episodes_total=episodes, n_nodes=cfg.n_nodes)
    evidence_log = [] if cfg.log_evidence else None
    env = Environment(
        net=net,
        attack=attack,
        gate=gate,
        update_cfg=cfg.trust,
        reward_cfg=cfg.reward,
        env_cfg=cfg.env,
        rng_consensus=rng_consensus,
        rng_attack=rng_attack,
        evidence_log=evidence_log,
    )
    return env, agent, rng_reset, episodes, warning


def simulate(cfg: ExperimentConfig, max_episodes: int | None = None):
    """Run the full episode loop in memory; returns (records, env, agent, warning)."""
    env, agent, rng_reset, episodes, warning = build_simulation(cfg)
    if max_episodes is not None:
        episodes = min(episodes, max_episodes)
    records = []
    for ep in range(1, episodes + 1):
        reset_profiles(env.net, rng_reset)
        records.append(run_episode(env, agent, episode_index=ep, steps=cfg.steps))
    return records, env, agent, warning


def run_experiment(cfg: ExperimentConfig, quiet: bool = True):
    """Execute one configured run and write all artifacts to cfg.out."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    records, env, agent, warning = simulate(cfg)
    if warning and not quiet:
        print(f"warning: {warning}", file=sys.stderr)
    episodes = len(records)

    write_csv(out / "episodes.csv", metrics.CSV_COLUMNS, [metrics.record_row(r) for r in records])

    tail = min(10, episodes)
    summary = metrics.aggregate_tail(records, tail)
    write_csv(
        out / "summary.csv",
        ("metric", "tail_mean", "tail_sd"),
        [(name, mean, sd) for name, (mean, sd) in summary.items()],
    )

    final = records[-1].confusion
    write_csv(out / "confusion.csv", ("tp", "fp", "fn", "tn"), [(final.tp, final.fp, final.fn, final.tn)])

    save_agent(agent, out / "agent.ckpt", seed=cfg.seed)
    emit_charts(records, out)

    with open(out / "manifest.txt", "w", encoding="utf-8") as fh:
        for line in manifest_lines(cfg, episodes, _kernels.backend_name(), __version__):
            fh.write(line + "\n")
    return records


def tail_mean_f1(records, tail: int = 10) -> float:
    window = records[-min(tail, len(records)):]
    return float(np.mean([r.f1 for r in window]))


def _matrix_cell(args):
    cfg_kwargs, agent, attack, seed, out_dir = args
    cfg = ExperimentConfig(**{**cfg_kwargs, "agent": agent, "attack": attack, "seed": seed, "out": out_dir})
    records = run_experiment(cfg)
    return agent, attack, seed, tail_mean_f1(records)


def run_matrix(
    base_cfg: ExperimentConfig,
    agents,
    attacks,
    seeds=MATRIX_SEEDS,
    workers: int = 1,
    quiet: bool = True,
):
    """Every agent x attack x seed combination; cells are cross-seed medians."""
    agents = list(agents)
    attacks = list(attacks)
    seeds = list(seeds)
    if not agents or not attacks or not seeds:
        raise ConfigError("matrix needs nonempty agent, attack, and seed lists")

    out = Path(base_cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    base_kwargs = {
        "steps": base_cfg.steps,
        "episodes": base_cfg.episodes,
        "n_nodes": base_cfg.n_nodes,
        "malicious_ratio": base_cfg.malicious_ratio,
        "gate_mode": base_cfg.gate_mode,
        "policy_file": base_cfg.policy_file,
        "trust": base_cfg.trust,
        "attack_cfg": base_cfg.attack_cfg,
        "reward": base_cfg.reward,
        "hyper": base_cfg.hyper,
        "env": base_cfg.env,
    }

    jobs = [
        (base_kwargs, agent, attack, seed, str(out / f"{agent}_{attack}_seed{seed}"))
        for attack in attacks
        for agent in agents
        for seed in seeds
    ]

    results: dict[tuple, list] = {(attack, agent): [] for attack in attacks for agent in agents}
    failures = []

    def record(agent, attack, seed, f1_value):
        results[(attack, agent)].append(f1_value)
        if not quiet:
            print(f"  {agent} vs {attack} seed {seed}: tail-10 mean F1 = {f1_value:.3f}")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_matrix_cell, job): job for job in jobs}
            for fut, job in futures.items():
                try:
                    record(*fut.result())
                except Exception:
                    failures.append((job[1], job[2], job[3], traceback.format_exc()))
    else:
        for job in jobs:
            try:
                record(*_matrix_cell(job))
            except Exception:
                failures.append((job[1], job[2], job[3], traceback.format_exc()))

    for agent, attack, seed, tb in failures:
        print(f"run failed: {agent} vs {attack} seed {seed}\n{tb}", file=sys.stderr)

    rows = []
    for attack in attacks:
        row = [attack]
        for agent in agents:
            values = results[(attack, agent)]
            row.append(repr(statistics.median(values)) if values else "missing")
        rows.append(row)
    write_csv(out / "matrix_f1.csv", ["attack"] + agents, rows)
    return results, failures
