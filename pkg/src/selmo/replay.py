"""The two bounded trajectory stores with distinct eviction semantics.

ModelReplay feeds the forward-model learner: uniform-random eviction when
full, so old experience keeps getting revisited.  PolicyReplay feeds the
policy learner: strict FIFO eviction, so the stalest reward labels leave
first.  Both cap how often a single item may be sampled; an item that hits
the cap is evicted on the spot, which keeps every stored item eligible and
frees capacity.

Each buffer supports one writer and one reader concurrently; every public
operation is atomic under an internal lock.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

# on_evict reasons
EVICT_CAPACITY = "capacity"
EVICT_SAMPLE_CAP = "sample_cap"


@dataclass(frozen=True)
class ReplayConfig:
    capacity: int = 50_000
    max_samples: int = 32

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")


class _Entry:
    __slots__ = ("item", "samples")

    def __init__(self, item: Any):
        self.item = item
        self.samples = 0


class _BoundedStore:
    """Shared machinery: keyed entries plus an O(1) random-access live list."""

    def __init__(self, config: ReplayConfig, seed: int = 0,
                 on_evict: Callable[[str, Any], None] | None = None):
        self.config = config
        self.on_evict = on_evict
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._entries: dict[int, _Entry] = {}
        self._live: list[int] = []
        self._pos: dict[int, int] = {}
        self._next_key = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._live)

    def _insert(self, item: Any) -> int:
        key = self._next_key
        self._next_key += 1
        self._entries[key] = _Entry(item)
        self._pos[key] = len(self._live)
        self._live.append(key)
        return key

    def _remove(self, key: int) -> Any:
        # swap-remove from the live list; order is tracked separately where needed
        idx = self._pos.pop(key)
        last = self._live.pop()
        if last != key:
            self._live[idx] = last
            self._pos[last] = idx
        return self._entries.pop(key).item

    def _sample_batch_locked(self, batch_size: int) -> list[Any] | None:
        if batch_size < 1:
            raise ValueError("batch size must be positive")
        if len(self._live) < batch_size:
            return None  # not ready; caller retries later
        chosen = self._rng.choice(len(self._live), size=batch_size, replace=False)
        keys = [self._live[i] for i in chosen]
        batch = []
        for key in keys:
            entry = self._entries[key]
            entry.samples += 1
            batch.append(entry.item)
            if entry.samples >= self.config.max_samples:
                self._remove(key)
                if self.on_evict:
                    self.on_evict(EVICT_SAMPLE_CAP, entry.item)
        return batch

    def items_snapshot(self) -> list[tuple[Any, int]]:
        """Copy of (item, sample_count) pairs, for inspection and tests."""
        with self._lock:
            return [(self._entries[k].item, self._entries[k].samples) for k in self._live]


class ModelReplay(_BoundedStore):
    """Raw-trajectory buffer with uniform-random eviction when full."""

    def push(self, traj: Any) -> None:
        with self._lock:
            if len(self._live) >= self.config.capacity:
                victim = self._live[int(self._rng.integers(len(self._live)))]
                evicted = self._remove(victim)
                if self.on_evict:
                    self.on_evict(EVICT_CAPACITY, evicted)
            self._insert(traj)

    def sample_batch(self, batch_size: int) -> list[Any] | None:
        """Uniform batch without replacement, or None if too few items."""
        with self._lock:
            return self._sample_batch_locked(batch_size)


class PolicyReplay(_BoundedStore):
    """Labeled-trajectory buffer with strict FIFO eviction.

    The insertion queue is kept separately from the live list: sample-cap
    evictions may remove items from the middle, while capacity evictions
    always take the oldest survivor.
    """

    def __init__(self, config: ReplayConfig, seed: int = 0,
                 on_evict: Callable[[str, Any], None] | None = None):
        super().__init__(config, seed, on_evict)
        self._fifo: deque[int] = deque()

    def push(self, batch: list[Any]) -> None:
        with self._lock:
            for item in batch:
                while len(self._live) >= self.config.capacity:
                    self._evict_oldest_locked()
                key = self._insert(item)
                self._fifo.append(key)

    def _evict_oldest_locked(self) -> None:
        while self._fifo:
            key = self._fifo.popleft()
            if key in self._entries:
                evicted = self._remove(key)
                if self.on_evict:
                    self.on_evict(EVICT_CAPACITY, evicted)
                return
        raise AssertionError("live items without fifo record")  # unreachable

    def sample_batch(self, batch_size: int) -> list[Any] | None:
        """Uniform batch without replacement, or None if too few items.

        Sampling never disturbs FIFO order; dead fifo keys are skipped
        lazily at eviction time.
        """
        with self._lock:
            return self._sample_batch_locked(batch_size)

    def oldest_first(self) -> list[Any]:
        """Live items in insertion order, for inspection and tests."""
        with self._lock:
            return [self._entries[k].item for k in self._fifo if k in self._entries]
