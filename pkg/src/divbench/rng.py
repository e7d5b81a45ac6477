"""Deterministic random streams for reproducible generation and solving.

All randomness in the package flows through Philox, a counter-based
generator: a stream is fully determined by its key, so any (seed, tag...)
combination yields the same sequence on every platform and under any level
of parallelism. Independent components derive independent streams by
tagging the same master seed differently.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")


def stream(*keys) -> np.random.Generator:
    """Return a Philox-backed Generator keyed by the given ints/strings.

    Same keys, same stream. String keys are hashed; integer keys are
    taken modulo 2**64 so negative seeds are accepted.
    """
    if not keys:
        raise ValueError("at least one stream key is required")
    entropy = [_key_int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
