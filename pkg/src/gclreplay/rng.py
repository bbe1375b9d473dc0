"""Named, independent random streams derived from one master seed.

Every stochastic component draws from its own stream so that switching a
sampler or toggling refinement never shifts the randomness another component
sees: runs with the same master seed stay paired across methods.
"""

from __future__ import annotations

import numpy as np

# Stable tags; never renumber, reports and paired comparisons depend on them.
_STREAM_TAGS = {
    "split": 0,
    "init_cls": 1,
    "init_lp": 2,
    "negatives": 3,
    "sampler": 4,
    "sl_mask": 5,
    "boost": 6,
}


def stream(master_seed: int, name: str, task: int | None = None) -> np.random.Generator:
    """Generator for the named stream, optionally scoped to one task index."""
    try:
        tag = _STREAM_TAGS[name]
    except KeyError:
        raise ValueError(f"unknown rng stream {name!r}") from None
    key = [int(master_seed), tag]
    if task is not None:
        key.append(int(task))
    return np.random.default_rng(np.random.SeedSequence(key))


def derived_seed(master_seed: int, name: str) -> int:
    """A plain integer seed derived from the named stream (for SplitSpec)."""
    return int(stream(master_seed, name).integers(0, 2**63 - 1))
