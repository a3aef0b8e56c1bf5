"""Named random streams derived from one 64-bit seed."""
from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("init", "env", "policy", "expert", "discriminator")


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,)))


def streams(seed: int) -> dict[str, np.random.Generator]:
    return {name: stream(seed, name) for name in STREAMS}
