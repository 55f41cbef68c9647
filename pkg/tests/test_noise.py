"""Counter-based generator: known-answer vectors, addressing, statistics."""

import numpy as np
import pytest

from glangevin import InvalidParameterError, NoiseStream, philox4x32
from glangevin.noise import normals_at, normals_chains

# published test vectors for philox4x32-10 (counter, key) -> output words
KAT = [
    ((0, 0, 0, 0), (0, 0),
     (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2,
     (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
     (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def test_philox_known_answers():
    for counter, key, expected in KAT:
        out = philox4x32(counter, key)
        assert tuple(int(w) for w in out) == expected


def test_philox_vectorized_matches_scalar():
    counters = np.array([[0, 1, 2, 77], [0, 0, 5, 0], [3, 0, 0, 9], [0, 8, 0, 0]],
                        dtype=np.uint64)
    vec = philox4x32((counters[0], counters[1], counters[2], counters[3]), (12, 34))
    for i in range(counters.shape[1]):
        one = philox4x32(tuple(int(counters[j, i]) for j in range(4)), (12, 34))
        assert all(int(a[i]) == int(b) for a, b in zip(vec, one))


def test_normals_addressable_and_consistent():
    z = normals_at(123, 0, 0, 0, 100)
    # any sub-slice must be reproducible from its own address
    for start, count in [(0, 1), (7, 13), (99, 1), (50, 50)]:
        np.testing.assert_array_equal(normals_at(123, 0, 0, start, count),
                                      z[start:start + count])
    assert normals_at(123, 0, 0, 0, 0).size == 0
    with pytest.raises(InvalidParameterError):
        normals_at(123, 0, 0, 0, -1)


def test_normals_chains_match_single_chain_calls():
    batch = normals_chains(9, [0, 1, 5], 2, 3, 17)
    for row, chain in zip(batch, [0, 1, 5]):
        np.testing.assert_array_equal(row, normals_at(9, chain, 2, 3, 17))


def test_streams_differ_across_seed_chain_domain():
    base = normals_at(1, 0, 0, 0, 64)
    assert not np.array_equal(base, normals_at(2, 0, 0, 0, 64))
    assert not np.array_equal(base, normals_at(1, 1, 0, 0, 64))
    assert not np.array_equal(base, normals_at(1, 0, 1, 0, 64))


def test_normal_statistics():
    z = normals_at(2024, 0, 0, 0, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert abs(np.mean(z ** 3)) < 0.02          # skewness
    assert abs(np.mean(z ** 4) - 3.0) < 0.05    # kurtosis
    # lag-1 serial correlation
    assert abs(np.mean(z[:-1] * z[1:])) < 0.01


def test_chains_statistically_independent():
    a = normals_at(5, 0, 0, 0, 100_000)
    b = normals_at(5, 1, 0, 0, 100_000)
    corr = float(np.mean(a * b))
    assert abs(corr) < 0.01


def test_stream_cursor():
    s = NoiseStream(42, chain=3)
    first = s.standard_normals(10)
    second = s.standard_normals(5)
    fresh = NoiseStream(42, chain=3)
    np.testing.assert_array_equal(fresh.standard_normals(15),
                                  np.concatenate([first, second]))
    assert s.counter == 15
    assert s.spawn(4).chain == 4


def test_stream_validation():
    with pytest.raises(InvalidParameterError):
        NoiseStream(-1)
    with pytest.raises(InvalidParameterError):
        NoiseStream(0, chain=2 ** 32)
