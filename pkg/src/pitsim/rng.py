"""Named RNG substreams derived from one base seed.

Each consumer (marker placement, spawning, pit selection) draws from its own
stream, so adding a consumer never perturbs the numbers any other one sees.
"""

from __future__ import annotations

import random
import zlib


def derive(seed: int, name: str) -> int:
    # crc32 is stable across processes; built-in hash() is salted per run.
    tag = zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF
    return ((seed & 0xFFFFFFFF) << 32) | tag


def substream(seed: int, name: str) -> random.Random:
    return random.Random(derive(seed, name))
