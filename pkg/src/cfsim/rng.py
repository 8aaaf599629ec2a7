"""Deterministic random sub-streams.

Every random draw in the simulator comes from a generator keyed by
``(seed, layout, fading, purpose)``, so results do not depend on the order in
which Monte-Carlo cells are executed.
"""

import zlib

import numpy as np

RandomStream = np.random.Generator

# fading index used for layout-level draws
LAYOUT_LEVEL = 2**32 - 1


def purpose_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, layout: int, fading: int, purpose: str) -> RandomStream:
    """Return an independent generator for one (layout, fading, purpose) cell."""
    seq = np.random.SeedSequence(
        entropy=int(seed) & (2**64 - 1),
        spawn_key=(int(layout), int(fading), purpose_key(purpose)),
    )
    return np.random.Generator(np.random.PCG64(seq))


def layout_stream(seed: int, layout: int, purpose: str) -> RandomStream:
    return substream(seed, layout, LAYOUT_LEVEL, purpose)
