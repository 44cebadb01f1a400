"""trustsim: a deterministic simulator of trust-based delegated consensus
under adversarial attacks, defended by reinforcement-learning agents."""

__version__ = "0.1.0"
