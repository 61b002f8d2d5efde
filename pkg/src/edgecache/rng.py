"""Named random substreams derived from a single run seed.

Every source of randomness (trace generation, weight init, epsilon-greedy
exploration, replay sampling) pulls from its own named stream so that runs
are reproducible end to end and adding a consumer does not perturb the
others.
"""

import numpy as np

from .errors import ConfigError


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for the (seed, name) stream."""
    seed = int(seed)
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    entropy = [seed] + list(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(seed: int, index: int) -> int:
    """Derived integer seed for the index-th component of a composite config."""
    seed = int(seed)
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return int(np.random.SeedSequence([seed, int(index)]).generate_state(1)[0])
