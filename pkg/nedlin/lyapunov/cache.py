"""
MatrixCache: thread-safe memo of time-indexed matrices.

Holds S(t) samples of quadratic forms and tau-grids of Phi(tau, t) for strict
Lyapunov functions. Values are pure functions of their key, so concurrent
inserts of the same key are idempotent: the first stored value wins and later
writers receive it back.

Root finders evaluate at ever new times, so the memo is bounded and evicts
the least recently used entry.
"""

from __future__ import annotations

from collections import OrderedDict
from threading import Lock
from typing import Any, Callable, Hashable

import numpy as np

DEFAULT_MAX_ENTRIES = 4096


class MatrixCache:
    """
    Lock-protected key -> value memo with least-recently-used eviction.

    Computation happens outside the lock; only lookups and inserts are
    serialized. ``max_entries=None`` disables eviction.
    """

    def __init__(self, max_entries: int | None = DEFAULT_MAX_ENTRIES):
        if max_entries is not None and max_entries < 1:
            raise ValueError(f"max_entries must be positive, got {max_entries}")
        self._store: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = Lock()
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Any:
        """
        Raises:
            KeyError: If the key has not been inserted.
        """
        with self._lock:
            if key not in self._store:
                raise KeyError(f"No cached value for {key!r}")
            self._store.move_to_end(key)
            return self._store[key]

    def insert(self, key: Hashable, value: Any) -> Any:
        """Store ``value`` unless ``key`` is present; returns the stored value."""
        if isinstance(value, np.ndarray):
            value = value.copy()
            value.setflags(write=False)
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                return self._store[key]
            self._store[key] = value
            if self.max_entries is not None:
                while len(self._store) > self.max_entries:
                    self._store.popitem(last=False)
            return value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._store:
                self.hits += 1
                self._store.move_to_end(key)
                return self._store[key]
            self.misses += 1
        return self.insert(key, compute())

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._store

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
