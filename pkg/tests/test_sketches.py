import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from v6edge.sketches import COUNTER_MAX, BloomFilter, CountMinSketch, hash_row


def test_hash_reference_vectors():
    # Published XXH64 test vectors.
    assert hash_row(0, b"") == 0xEF46DB3751D8E999
    assert hash_row(0, b"a") == 0xD24EC4F1A98C6E5B
    assert hash_row(0, b"abc") == 0x44BC2CF5AD770999


def test_hash_deterministic_and_seeded():
    assert hash_row(7, b"key") == hash_row(7, b"key")
    rng = random.Random(1)
    keys = [rng.randbytes(16) for _ in range(100)]
    assert any(hash_row(1, k) != hash_row(2, k) for k in keys)
    assert isinstance(hash_row(99, b""), int)


def test_fresh_and_single_key():
    cms = CountMinSketch()
    assert cms.estimate(b"k") == 0
    cms.increment(b"k")
    assert cms.estimate(b"k") == 1
    for _ in range(99):
        cms.increment(b"k")
    assert cms.estimate(b"k") == 100


def test_estimate_is_min_of_cells():
    cms = CountMinSketch(width=64)
    cells = cms._cells(b"x")
    for row, i, v in zip(cms.rows, cells, (5, 3, 9)):
        row[i] = v
    assert cms.estimate(b"x") == 3


def test_narrow_sketch_never_undercounts():
    cms = CountMinSketch(width=64)
    keys = [i.to_bytes(4, "big") for i in range(1000)]
    for k in keys:
        cms.increment(k)
    assert all(cms.estimate(k) >= 1 for k in keys)


def test_reset():
    cms = CountMinSketch()
    cms.increment(b"k")
    g = cms.generation
    cms.reset()
    assert cms.estimate(b"k") == 0 and cms.counter_sum() == 0
    cms.reset()
    assert cms.estimate(b"k") == 0
    assert cms.generation == g + 2


def test_saturation():
    cms = CountMinSketch(width=8)
    for row in cms.rows:
        for i in range(8):
            row[i] = COUNTER_MAX
    cms.increment(b"k")
    assert cms.estimate(b"k") == COUNTER_MAX


@pytest.mark.parametrize("width, seeds", [(100, (1, 2, 3)), (64, (1, 1, 2)), (64, (1, 2))])
def test_layout_validation(width, seeds):
    with pytest.raises(ValueError):
        CountMinSketch(width, seeds)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 300), max_size=2000), st.sampled_from([16, 64, 4096]))
def test_overestimate_only(stream, width):
    cms = CountMinSketch(width=width)
    exact = Counter()
    for k in stream:
        cms.increment(k.to_bytes(2, "big"))
        exact[k] += 1
    for k in range(301):
        assert cms.estimate(k.to_bytes(2, "big")) >= exact[k]


def test_exact_when_sparse():
    # Golden seeds: 256 distinct keys each own a collision-free cell in some row.
    cms = CountMinSketch(width=4096)
    rng = random.Random(3)
    exact = Counter(rng.choice(range(256)) for _ in range(20000))
    for k, n in exact.items():
        for _ in range(n):
            cms.increment(str(k).encode())
    assert all(cms.estimate(str(k).encode()) == n for k, n in exact.items())


def test_bloom_basics():
    bf = BloomFilter()
    assert not bf.check(b"k")
    bf.insert(b"k")
    assert bf.check(b"k") and b"k" in bf


def test_bloom_false_positive_rate():
    rng = random.Random(11)
    bf = BloomFilter(bits=65536)
    inserted = {rng.randbytes(16) for _ in range(100)}
    for k in inserted:
        bf.insert(k)
    probes = [rng.randbytes(16) for _ in range(10000)]
    fp = sum(bf.check(k) for k in probes if k not in inserted)
    assert fp / len(probes) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.lists(st.binary(max_size=8), max_size=200))
def test_bloom_no_false_negatives_and_monotone(keys):
    bf = BloomFilter(bits=256)
    seen = []
    for k in keys:
        before = [bf.check(x) for x in keys]
        bf.insert(k)
        seen.append(k)
        after = [bf.check(x) for x in keys]
        assert all(a or not b for a, b in zip(after, before))
        assert all(bf.check(x) for x in seen)
