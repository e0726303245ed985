"""Deterministic seed substreams.

All randomness in a run flows from one base seed; modules draw from named
substreams so that re-running any stage in isolation reproduces its draws.
The derivation uses SHA-256, which is stable across processes and platforms
(the builtin ``hash`` is not).
"""

from __future__ import annotations

import hashlib
import random

__all__ = ["derive_seed", "substream"]


def derive_seed(base_seed, *names):
    material = repr((int(base_seed),) + tuple(str(n) for n in names))
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(base_seed, *names):
    return random.Random(derive_seed(base_seed, *names))
