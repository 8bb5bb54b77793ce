"""Deterministic split of one top-level seed into named random streams."""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for ``name`` derived from ``seed``.

    The same (seed, name) pair always yields the same sequence, and distinct
    names give statistically independent streams.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
