import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import ref_hash64, ref_mix64
from freesketch.errors import InvalidArgument
from freesketch.hashing import (derive_seed, digest_many, family_index, geometric_rank, hash64_array, key_digest,
                                mix64, raw_hash, rank_from_bits, split_bits, split_hash, uniform_index)

N = 10**6


def _bulk(seed, n=N):
    return hash64_array(np.arange(n, dtype=np.uint64), np.uint64(seed))


def test_compiled_hash_matches_reference():
    for x in (0, 1, 2**63, 2**64 - 1, 123456789):
        assert int(mix64(np.uint64(x))) == ref_mix64(x)
        assert raw_hash(x, 99) == ref_hash64(x, 99)
    assert raw_hash("abc", 7) == ref_hash64(key_digest(b"abc"), 7)


def test_bulk_hash_agrees_with_scalar_api():
    bulk = _bulk(5, 1000)
    assert [raw_hash(i, 5) for i in range(1000)] == bulk.tolist()


def test_key_digest_rules():
    assert key_digest("x") == key_digest(b"x")
    assert key_digest(5) == 5
    assert key_digest(-1) == 2**64 - 1
    assert key_digest(b"5") != key_digest(5)
    with pytest.raises(TypeError):
        key_digest(1.5)


def test_uniform_index_range_one_and_determinism():
    assert {uniform_index(f"k{i}", 1, 3) for i in range(200)} == {1}
    assert uniform_index(b"key", 1000, 42) == uniform_index(b"key", 1000, 42)


def test_uniform_index_bounds_and_errors():
    vals = [uniform_index(i, 7, 0) for i in range(2000)]
    assert min(vals) == 1 and max(vals) == 7
    with pytest.raises(InvalidArgument):
        uniform_index(b"k", 0, 0)
    with pytest.raises(InvalidArgument):
        uniform_index(b"k", 2**32 + 1, 0)


def test_uniform_index_buckets_within_five_sigma():
    # the scalar API reduces the top 32 bits the same way; spot-checked below
    h = _bulk(11)
    buckets = ((h >> np.uint64(32)) * np.uint64(128)) >> np.uint64(32)
    assert [uniform_index(i, 128, 11) - 1 for i in range(500)] == buckets[:500].tolist()
    counts = np.bincount(buckets.astype(np.int64), minlength=128)
    p = 1 / 128
    sigma = np.sqrt(N * p * (1 - p))
    assert np.all(np.abs(counts - N * p) <= 5 * sigma)


def test_rank_from_bits_examples():
    assert rank_from_bits(1 << 63) == 1
    assert rank_from_bits(0b0001 << 60) == 4
    assert rank_from_bits(0b0001, width=4) == 4
    assert rank_from_bits(0, width=16) == 16


def test_geometric_rank_frequencies():
    h = _bulk(3)
    ranks = np.array([geometric_rank(i, 3) for i in range(2000)])
    lz = np.array([64 - int(x).bit_length() + 1 for x in h[:2000].tolist()])
    assert np.array_equal(ranks, np.minimum(lz, 64))
    all_ranks = 64 - np.floor(np.log2(h.astype(np.float64))).astype(np.int64)
    frac1 = np.mean(all_ranks == 1)
    assert abs(frac1 - 0.5) <= 0.002
    for k in range(1, 11):
        p = 2.0**-k
        f = np.mean(all_ranks == k)
        assert abs(f - p) <= 5 * np.sqrt(p * (1 - p) / N)


def test_split_bits_example():
    assert split_bits(0b01010010 << 56, 16) == (6, 3)


def test_split_hash_m1_and_errors():
    assert {split_hash(i, 1, 0).bucket for i in range(100)} == {1}
    with pytest.raises(InvalidArgument):
        split_hash(b"k", 0, 0)


def test_split_hash_non_power_of_two():
    for i in range(300):
        b, r = split_hash(i, 100, 1)
        assert 1 <= b <= 100 and 1 <= r <= 32


def test_split_bucket_marginal_uniform():
    h = _bulk(17)
    buckets = (h >> np.uint64(60)).astype(np.int64)
    assert [split_hash(i, 16, 17).bucket - 1 for i in range(500)] == buckets[:500].tolist()
    counts = np.bincount(buckets, minlength=16)
    sigma = np.sqrt(N / 16 * 15 / 16)
    assert np.all(np.abs(counts - N / 16) <= 5 * sigma)


def test_seeds_decorrelate():
    n = 200_000
    a = (_bulk(1, n) >> np.uint64(60)).astype(np.int64)
    b = (_bulk(2, n) >> np.uint64(60)).astype(np.int64)
    table = np.zeros((16, 16))
    np.add.at(table, (a, b), 1)
    assert stats.chi2_contingency(table)[1] > 1e-3


def test_family_index():
    vals = {family_index("u", i, 50, 9) for i in range(1, 200)}
    assert vals <= set(range(1, 51)) and len(vals) > 40
    assert family_index("u", 3, 50, 9) == family_index("u", 3, 50, 9)
    with pytest.raises(InvalidArgument):
        family_index("u", 0, 50, 9)


def test_derive_seed_distinct_labels():
    assert derive_seed(1, "FreeBS") != derive_seed(1, "FreeRS")
    assert derive_seed(1, "x") == derive_seed(1, "x")


def test_digest_many():
    assert digest_many(["a", 3]).tolist() == [key_digest("a"), 3]


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=32), st.integers(1, 2**32), st.integers(0, 2**64 - 1))
def test_uniform_index_always_in_range(key, n, seed):
    assert 1 <= uniform_index(key, n, seed) <= n
