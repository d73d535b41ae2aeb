"""Counter-based random streams.

Every draw is a pure function of ``(seed, tag, round, node, index)``, so the
value a node sees at a given round never depends on evaluation order,
on how many other draws happened before, or on which process computes it.

Bits come from the SplitMix64 finalizer applied to a chained hash of the
counter fields. Standard normals come from Box-Muller on pairs of 53-bit
uniforms: for a row of ``size`` normals, pair ``k`` of ``h = ceil(size/2)``
pairs yields entry ``k`` (cosine branch) and entry ``h + k`` (sine branch).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ROUND_MUL = np.uint64(0xD1B54A32D192ED03)
_NODE_MUL = np.uint64(0x8CB92BA72F3D8DD7)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=256)
def _tag_key(seed: int, tag: str) -> np.uint64:
    h = hashlib.blake2b(f"{seed & _MASK64}:{tag}".encode(), digest_size=8).digest()
    return np.uint64(int.from_bytes(h, "little"))


@dataclass(frozen=True)
class RandomStream:
    """Deterministic normal/uniform source keyed by a 64-bit seed.

    The stream holds no mutable state; two instances with the same seed are
    interchangeable.
    """

    seed: int

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise TypeError(f"seed must be an integer, got {type(self.seed).__name__}")

    def bits(self, tag: str, round: int, nodes, size: int) -> np.ndarray:
        """Raw 64-bit words, shape ``(len(nodes), size)``."""
        nodes = np.atleast_1d(np.asarray(nodes, dtype=np.uint64))
        with np.errstate(over="ignore"):
            key = _mix64(np.asarray(_tag_key(int(self.seed), tag)) + np.uint64(round & _MASK64) * _ROUND_MUL)
            node_key = _mix64(key ^ (nodes * _NODE_MUL + _GOLDEN))
            idx = np.arange(1, size + 1, dtype=np.uint64) * _GOLDEN
            return _mix64(node_key[:, None] + idx[None, :])

    def uniform(self, tag: str, round: int, nodes, size: int) -> np.ndarray:
        """Uniforms on [0, 1) with 53 bits of resolution."""
        return (self.bits(tag, round, nodes, size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, tag: str, round: int, nodes, size: int) -> np.ndarray:
        """Standard normal variates, shape ``(len(nodes), size)``."""
        half = (size + 1) // 2
        u = self.uniform(tag, round, nodes, 2 * half)
        radius = np.sqrt(-2.0 * np.log(1.0 - u[:, :half]))  # 1 - u in (0, 1]
        angle = (2.0 * np.pi) * u[:, half:]
        return np.concatenate((radius * np.cos(angle), radius * np.sin(angle)), axis=1)[:, :size]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    text = "\x1f".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little") >> 1
