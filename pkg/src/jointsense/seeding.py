"""Random substreams derived from a single master seed.

Every random quantity is drawn from a :class:`numpy.random.SeedSequence`
whose ``spawn_key`` names its purpose, so adding or removing one consumer
never shifts the numbers another consumer sees:

* ``(0, k)``  fading sample used to average the value function of channel k
* ``(1, r)``  replication r of a closed-loop simulation, split further into
  ``(1, r, 0)`` initial occupancy, ``(1, r, 1)`` gains, ``(1, r, 2)``
  primary transitions and ``(1, r, 3)`` sensor outcomes

Each per-replication quantity has its own stream and is drawn slot by slot
in order, so a longer simulation repeats the first slots of a shorter one.
"""

from __future__ import annotations

import numpy as np

FADING_STREAM = 0
REPLICATION_STREAM = 1


def _seq(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def fading_rng(seed: int, channel: int) -> np.random.Generator:
    return np.random.default_rng(_seq(seed, FADING_STREAM, channel))


REPLICATION_PARTS = ("init", "gains", "transitions", "outcomes")


def replication_streams(seed: int, replication: int) -> dict:
    """One generator per random quantity of a replication, keyed by :data:`REPLICATION_PARTS`."""
    return {
        name: np.random.default_rng(_seq(seed, REPLICATION_STREAM, replication, i))
        for i, name in enumerate(REPLICATION_PARTS)
    }
