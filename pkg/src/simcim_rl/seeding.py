"""Deterministic fan-out of one master seed into per-component streams.

Every source of randomness in the package is a numpy Generator derived from
(master_seed, label, *indices) through SeedSequence, so a run manifest that
records the master seed pins the whole run.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_sequence(master_seed: int, label: str, *indices: int) -> np.random.SeedSequence:
    """SeedSequence for component `label`, optionally indexed (e.g. per instance)."""
    entropy = [int(master_seed), _label_entropy(label), *map(int, indices)]
    return np.random.SeedSequence(entropy)


def component_rng(master_seed: int, label: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, label, *indices))


def component_seed(master_seed: int, label: str, *indices: int) -> int:
    """A plain integer seed for APIs that take one; stable per (seed, label, indices)."""
    return int(seed_sequence(master_seed, label, *indices).generate_state(1, np.uint64)[0])
