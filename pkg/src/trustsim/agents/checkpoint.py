"""Portable flat checkpoint files.

Layout: a magic line, one JSON header line (topology, hyperparameters,
seed, exploration state, array directory), then the raw parameter arrays
in the declared order as little-endian 64-bit floats in C order.  The
byte stream is identical across platforms.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .dqn import DqnAgent
from .marl import MarlPool
from .nn import AgentHyperparams
from .tabular import DiscretizationSpec, QTable, TabularAgent

MAGIC = b"TRUSTSIM-CKPT-1\n"
_DTYPE = "<f8"


def save_checkpoint(path, kind: str, topology: dict, hyperparams: dict, seed, arrays, extra=None) -> None:
    header = {
        "kind": kind,
        "topology": topology,
        "hyperparams": hyperparams,
        "seed": seed,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
    }
    if extra:
        header.update(extra)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).astype(_DTYPE).tobytes("C"))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a trustsim checkpoint")
        header = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"truncated checkpoint array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype=_DTYPE).astype(np.float64).reshape(shape)
    return header, arrays


def _hp_dict(hp: AgentHyperparams) -> dict:
    d = asdict(hp)
    d["hidden_sizes"] = list(hp.hidden_sizes)
    return d


def _hp_from_dict(d: dict) -> AgentHyperparams:
    d = dict(d)
    d["hidden_sizes"] = tuple(d["hidden_sizes"])
    return AgentHyperparams(**d)


def save_agent(agent, path, seed=None) -> None:
    if isinstance(agent, TabularAgent):
        keys = sorted(agent.q.table)
        key_arr = np.array([list(k) for k in keys], dtype=np.float64).reshape(len(keys), -1)
        val_arr = (
            np.stack([agent.q.table[k] for k in keys])
            if keys
            else np.zeros((0, agent.q.n_actions))
        )
        save_checkpoint(
            path,
            "tabular",
            {
                "bins": list(agent.spec.bins),
                "lows": list(agent.spec.lows),
                "highs": list(agent.spec.highs),
            },
            _hp_dict(agent.hp),
            seed,
            [("state_keys", key_arr), ("qvalues", val_arr)],
            extra={"eps": agent.eps},
        )
        return

    if isinstance(agent, (DqnAgent, MarlPool)):
        kind = "marl" if isinstance(agent, MarlPool) else "dqn"
        topology = agent.online.topology()
        if kind == "marl":
            topology["n_agents"] = agent.n_agents
        names = agent.online.parameter_names()
        arrays = [(f"online.{n}", p) for n, p in zip(names, agent.online.parameters())]
        arrays += [(f"target.{n}", p) for n, p in zip(names, agent.target.parameters())]
        save_checkpoint(path, kind, topology, _hp_dict(agent.hp), seed, arrays, extra={"eps": agent.eps})
        return

    raise TypeError(f"cannot checkpoint agent of type {type(agent).__name__}")


def load_agent(path, rng: np.random.Generator | None = None, episodes_total: int = 50):
    header, arrays = load_checkpoint(path)
    hp = _hp_from_dict(header["hyperparams"])
    rng = rng if rng is not None else np.random.default_rng(0)
    kind = header["kind"]

    if kind == "tabular":
        agent = TabularAgent(hp, rng, episodes_total)
        topo = header["topology"]
        agent.spec = DiscretizationSpec(tuple(topo["bins"]), tuple(topo["lows"]), tuple(topo["highs"]))
        agent.q = QTable()
        keys = arrays["state_keys"]
        values = arrays["qvalues"]
        for i in range(len(keys)):
            agent.q.table[bytes(int(b) for b in keys[i])] = values[i].copy()
        agent.eps = header.get("eps", hp.eps_min)
        return agent

    if kind in ("dqn", "marl"):
        topo = header["topology"]
        common = dict(
            hp=hp,
            rng=rng,
            episodes_total=episodes_total,
            state_dim=topo["input_dim"],
            n_actions=topo["n_actions"],
        )
        agent = MarlPool(n_agents=topo["n_agents"], **common) if kind == "marl" else DqnAgent(**common)
        names = agent.online.parameter_names()
        for name, param in zip(names, agent.online.parameters()):
            np.copyto(param, arrays[f"online.{name}"])
        for name, param in zip(names, agent.target.parameters()):
            np.copyto(param, arrays[f"target.{name}"])
        if kind == "marl":
            agent.acting.copy_from(agent.online)
        agent.eps = header.get("eps", hp.eps_min)
        return agent

    raise ValueError(f"unknown checkpoint kind {kind!r}")
