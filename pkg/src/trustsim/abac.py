"""Attribute-based access control evaluated through an opaque encrypted backend.

Decisions follow the pipeline encrypt(attributes) -> evaluate(policy) ->
decrypt(decision).  The default backend simulates encryption: payloads are
blinded with a keyed stream so repeated encryptions of the same attributes
differ, and evaluation happens on an internal plaintext engine.  The
plaintext evaluator is kept public as the parity oracle; every policy and
attribute set must produce the same decision on both paths.

Policy files use a small expression grammar, e.g.::

    (trust >= 45) & ((role == 2) | (role == 3))

Leaves compare one attribute against an integer constant with one of
``< <= > >= == !=``; internal nodes combine with ``&`` (AND) and ``|`` (OR).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np


class AbacError(Exception):
    pass


# role codes used by the simulator
ROLE_DEVICE = 0
ROLE_SENSOR = 1
ROLE_VALIDATOR = 2
ROLE_DELEGATE = 3

DEFAULT_SCHEMA = {
    "trust": (0, 100),
    "role": (0, 15),
    "clearance": (0, 15),
    "permissions": (0, 255),
}

DEFAULT_POLICY_TEXT = "(trust >= 45) & ((role == 2) | (role == 3))"


@dataclass(frozen=True)
class AttributeSet:
    """Named integer-encoded attributes; names must be unique (dict enforces)."""

    values: dict

    def __post_init__(self):
        for name, v in self.values.items():
            if not isinstance(v, int) or isinstance(v, bool):
                raise AbacError(f"attribute {name!r} must be an int, got {v!r}")


def quantize_trust(tau: float) -> int:
    """Map a trust score in (0,1) to the integer [0,100] policy domain.

    Uses floor so that tau < 0.45 maps below 45 exactly, matching the
    strict-inequality classification boundary.
    """
    return max(0, min(100, int(np.floor(tau * 100.0))))


# --- policy expression tree -------------------------------------------------

_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


@dataclass(frozen=True)
class Leaf:
    attribute: str
    op: str
    constant: int

    def __post_init__(self):
        if self.op not in _OPS:
            raise AbacError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


Policy = Leaf | And | Or


def eval_policy_plain(policy: Policy, attrs: AttributeSet) -> bool:
    """Standard boolean evaluation of the expression tree (parity oracle)."""
    if isinstance(policy, Leaf):
        if policy.attribute not in attrs.values:
            raise AbacError(f"policy references unknown attribute {policy.attribute!r}")
        return _OPS[policy.op](attrs.values[policy.attribute], policy.constant)
    if isinstance(policy, And):
        return all(eval_policy_plain(c, attrs) for c in policy.children)
    if isinstance(policy, Or):
        return any(eval_policy_plain(c, attrs) for c in policy.children)
    raise TypeError(f"not a policy node: {policy!r}")


def policy_attributes(policy: Policy) -> set[str]:
    if isinstance(policy, Leaf):
        return {policy.attribute}
    out: set[str] = set()
    for c in policy.children:
        out |= policy_attributes(c)
    return out


# --- policy text parser -----------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(&)|(\|)|(<=|>=|==|!=|<|>)|([A-Za-z_][A-Za-z0-9_]*)|(-?\d+))")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            remainder = text[pos:].strip()
            if not remainder:
                break
            raise AbacError(f"cannot tokenize policy text at: {remainder[:20]!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over:  or := and ('|' and)* ; and := atom ('&' atom)* ;
    atom := '(' or ')' | name op int"""

    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise AbacError("unexpected end of policy text")
        self.i += 1
        return tok

    def parse(self) -> Policy:
        node = self.parse_or()
        if self.peek() is not None:
            raise AbacError(f"trailing tokens in policy text: {self.tokens[self.i:]}")
        return node

    def parse_or(self) -> Policy:
        children = [self.parse_and()]
        while self.peek() == "|":
            self.take()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> Policy:
        children = [self.parse_atom()]
        while self.peek() == "&":
            self.take()
            children.append(self.parse_atom())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_atom(self) -> Policy:
        tok = self.take()
        if tok == "(":
            node = self.parse_or()
            if self.take() != ")":
                raise AbacError("unbalanced parentheses in policy text")
            return node
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise AbacError(f"expected attribute name, got {tok!r}")
        op = self.take()
        if op not in _OPS:
            raise AbacError(f"expected comparison operator, got {op!r}")
        const = self.take()
        try:
            value = int(const)
        except ValueError:
            raise AbacError(f"expected integer constant, got {const!r}") from None
        return Leaf(tok, op, value)


def parse_policy(text: str) -> Policy:
    tokens = _tokenize(text)
    if not tokens:
        raise AbacError("empty policy text")
    return _Parser(tokens).parse()


def load_policy(path) -> Policy:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_policy(fh.read())


# --- encrypted evaluation backend -------------------------------------------


@dataclass(frozen=True)
class Ciphertext:
    backend_tag: str
    payload: bytes


class SimulatedFheBackend:
    """Simulated-encryption backend.

    Payloads are the JSON encoding of the attributes XOR-masked with a
    keystream derived from a per-instance secret key and a fresh nonce, so
    identical plaintexts never share a payload.  Evaluation decrypts
    internally, runs the plaintext engine, and re-encrypts the decision.
    This reproduces the pipeline semantics only; it offers no cryptographic
    strength and says so in its tag.
    """

    tag = "simulated-fhe"

    def __init__(self, seed: int = 0, schema: dict | None = None):
        self._rng = np.random.default_rng(np.random.SeedSequence([0x5EC12E7, seed]))
        self._key = self._rng.bytes(32)
        self.schema = dict(DEFAULT_SCHEMA if schema is None else schema)

    # keystream = blake2b(key || nonce || counter blocks)
    def _mask(self, nonce: bytes, data: bytes) -> bytes:
        out = bytearray(len(data))
        block = 0
        pos = 0
        while pos < len(data):
            stream = hashlib.blake2b(
                self._key + nonce + block.to_bytes(4, "little"), digest_size=64
            ).digest()
            n = min(64, len(data) - pos)
            for i in range(n):
                out[pos + i] = data[pos + i] ^ stream[i]
            pos += n
            block += 1
        return bytes(out)

    def _seal(self, obj) -> Ciphertext:
        nonce = self._rng.bytes(16)
        plain = json.dumps(obj, sort_keys=True).encode("utf-8")
        return Ciphertext(self.tag, nonce + self._mask(nonce, plain))

    def _open(self, ct: Ciphertext):
        if ct.backend_tag != self.tag:
            raise AbacError(f"ciphertext belongs to backend {ct.backend_tag!r}, not {self.tag!r}")
        nonce, body = ct.payload[:16], ct.payload[16:]
        return json.loads(self._mask(nonce, body).decode("utf-8"))

    def encrypt_attributes(self, attrs: AttributeSet) -> Ciphertext:
        if not attrs.values:
            raise AbacError("cannot encrypt an empty attribute set")
        for name, v in attrs.values.items():
            bounds = self.schema.get(name)
            if bounds is not None and not (bounds[0] <= v <= bounds[1]):
                raise AbacError(
                    f"attribute {name!r}={v} outside declared range [{bounds[0]}, {bounds[1]}]"
                )
        return self._seal(attrs.values)

    def decrypt_attributes(self, ct: Ciphertext) -> AttributeSet:
        """Backend-internal test hook for the round-trip contract."""
        return AttributeSet(self._open(ct))

    def eval_policy(self, policy: Policy, ct: Ciphertext) -> Ciphertext:
        attrs = AttributeSet(self._open(ct))
        missing = policy_attributes(policy) - set(attrs.values)
        if missing:
            raise AbacError(f"policy references attributes absent from ciphertext: {sorted(missing)}")
        decision = eval_policy_plain(policy, attrs)
        return self._seal({"decision": int(decision)})

    def decrypt_decision(self, ct: Ciphertext) -> bool:
        obj = self._open(ct)
        if set(obj) != {"decision"}:
            raise AbacError("ciphertext does not hold a decision")
        return bool(obj["decision"])


def encrypt_attributes(attrs: AttributeSet, backend) -> Ciphertext:
    return backend.encrypt_attributes(attrs)


def eval_policy_encrypted(policy: Policy, ct: Ciphertext, backend) -> Ciphertext:
    return backend.eval_policy(policy, ct)


# --- the gate used by the simulation ----------------------------------------


class PolicyGate:
    """Per-node access decision used before delegate selection.

    ``mode="plain"`` evaluates the policy tree directly; ``mode="encrypted"``
    pushes every decision through the full encrypt/eval/decrypt pipeline.
    The two modes are parity-tested and produce identical decisions; plain
    is the default because it avoids per-step ciphertext churn.
    """

    def __init__(self, policy: Policy | None = None, mode: str = "plain", backend=None):
        self.policy = policy if policy is not None else parse_policy(DEFAULT_POLICY_TEXT)
        if mode not in ("plain", "encrypted"):
            raise AbacError(f"gate mode must be plain|encrypted, got {mode!r}")
        self.mode = mode
        self.backend = backend if backend is not None else SimulatedFheBackend()

    def decide(self, attrs: AttributeSet) -> bool:
        if self.mode == "plain":
            return eval_policy_plain(self.policy, attrs)
        ct = self.backend.encrypt_attributes(attrs)
        return self.backend.decrypt_decision(self.backend.eval_policy(self.policy, ct))

    def node_attributes(self, tau: float, role_code: int = ROLE_VALIDATOR) -> AttributeSet:
        return AttributeSet(
            {"trust": quantize_trust(tau), "role": role_code, "clearance": 3, "permissions": 7}
        )

    def accepted(self, trusts, role_codes=None) -> np.ndarray:
        """Indices of nodes whose access decision is accept."""
        out = []
        for i, tau in enumerate(trusts):
            role = ROLE_VALIDATOR if role_codes is None else role_codes[i]
            if self.decide(self.node_attributes(float(tau), role)):
                out.append(i)
        return np.array(out, dtype=np.int64)
