"""Counter-based random streams keyed by (seed, purpose, member, step).

Each key deterministically derives an independent Philox stream, so
consumers (ensemble members, per-step latent draws, data shuffles) can run
in any order or in parallel and still see identical randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag(purpose: str) -> int:
    return int.from_bytes(hashlib.sha256(purpose.encode()).digest()[:8], "little")


def stream(seed: int, purpose: str, member: int = 0, step: int = 0) -> np.random.Generator:
    """Independent generator for this (seed, purpose, member, step) key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag(purpose), int(member), int(step)))
    return np.random.Generator(np.random.Philox(ss))
