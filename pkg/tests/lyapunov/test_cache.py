import threading

import numpy as np
import pytest

from nedlin.lyapunov.cache import DEFAULT_MAX_ENTRIES, MatrixCache


def test_get_missing_key_raises():
    with pytest.raises(KeyError):
        MatrixCache().get(("S", 1.0))


def test_first_insert_wins():
    cache = MatrixCache()
    first = cache.insert("k", np.eye(2))
    second = cache.insert("k", np.zeros((2, 2)))
    assert second is first
    assert np.array_equal(cache.get("k"), np.eye(2))
    assert len(cache) == 1


def test_stored_arrays_are_read_only_copies():
    cache = MatrixCache()
    source = np.ones(3)
    stored = cache.insert("k", source)
    source[0] = 5.0
    assert stored[0] == 1.0
    with pytest.raises(ValueError):
        stored[1] = 2.0


def test_least_recently_used_entry_is_evicted():
    cache = MatrixCache(max_entries=2)
    cache.insert("a", 1)
    cache.insert("b", 2)
    cache.get_or_compute("a", lambda: 0)
    cache.insert("c", 3)
    assert "b" not in cache
    assert "a" in cache and "c" in cache
    assert len(cache) == 2


def test_default_bound_and_unbounded_option():
    assert MatrixCache().max_entries == DEFAULT_MAX_ENTRIES
    cache = MatrixCache(max_entries=None)
    for k in range(100):
        cache.insert(k, k)
    assert len(cache) == 100
    with pytest.raises(ValueError):
        MatrixCache(max_entries=0)


def test_concurrent_computation_yields_one_value():
    cache = MatrixCache()
    barrier = threading.Barrier(8)
    results = []

    def worker(seed: int):
        barrier.wait()
        results.append(cache.get_or_compute(("S", 0.5), lambda: np.full(2, float(seed))))

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(results) == 8
    assert all(r is results[0] for r in results)
    assert cache.hits + cache.misses == 8
    assert len(cache) == 1


def test_clear():
    cache = MatrixCache()
    cache.get_or_compute("k", lambda: 1)
    cache.get_or_compute("k", lambda: 2)
    assert cache.hits == 1
    cache.clear()
    assert len(cache) == 0
