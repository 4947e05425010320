"""Derived random streams and worker fan-out.

Replicas are grouped into fixed-size blocks. Block ``b`` of an experiment
tagged ``tag`` draws from a Philox generator keyed by
``SeedSequence(root_seed, spawn_key=(tag_key, b))``. The block partition
does not depend on the number of workers, so neither do the results.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

U64_MAX = 2**64 - 1
DEFAULT_BLOCK_SIZE = 4096


def tag_key(tag: str) -> int:
    """Stable 32-bit key of an experiment tag."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derived_generator(root_seed: int, tag: str, index: int) -> np.random.Generator:
    """Counter-based generator for replica block ``index`` under ``tag``."""
    seq = np.random.SeedSequence(entropy=root_seed, spawn_key=(tag_key(tag), index))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ReplicaStreams:
    """Factory of per-block random streams for one estimator call."""

    root_seed: int
    tag: str = "default"
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.root_seed <= U64_MAX:
            raise ValueError(f"root_seed must be a 64-bit unsigned value, got {self.root_seed}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def child(self, tag: str) -> ReplicaStreams:
        """Streams for a sub-experiment; independent of the parent's streams."""
        return replace(self, tag=f"{self.tag}/{tag}")

    def generator(self, block: int = 0) -> np.random.Generator:
        return derived_generator(self.root_seed, self.tag, block)

    def blocks(self, n_replicas: int) -> list[tuple[int, int]]:
        """``(block_index, size)`` pairs covering ``n_replicas`` replicas."""
        full, rest = divmod(n_replicas, self.block_size)
        out = [(b, self.block_size) for b in range(full)]
        if rest:
            out.append((full, rest))
        return out

    def map_blocks(
        self,
        fn: Callable[[np.random.Generator, int], T],
        n_replicas: int,
    ) -> list[T]:
        """Apply ``fn(rng, size)`` to every block; results in block order."""
        blocks = self.blocks(n_replicas)

        def run(item: tuple[int, int]) -> T:
            index, size = item
            return fn(self.generator(index), size)

        if self.workers == 1 or len(blocks) <= 1:
            return [run(b) for b in blocks]
        logger.debug(
            "Fanning %d blocks of %s over %d workers", len(blocks), self.tag, self.workers
        )
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(run, blocks))


def as_streams(rng: ReplicaStreams | int | None, tag: str) -> ReplicaStreams:
    """Coerce an integer seed (or None, meaning seed 0) into streams."""
    if isinstance(rng, ReplicaStreams):
        return rng
    return ReplicaStreams(root_seed=int(rng or 0), tag=tag)


def concat_blocks(parts: list[np.ndarray], axis: int = 0) -> np.ndarray:
    """Concatenate block results in block order."""
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=axis)
