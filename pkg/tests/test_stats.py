"""Batch means: exactness on degenerate input, CLT scaling, AR(1) variance."""

import numpy as np
import pytest

from glangevin import BatchAccumulator, InvalidParameterError, batch_means
from glangevin.noise import normals_at


def test_constant_stream():
    est = batch_means(np.full(640, 3.25), batches=64)
    assert est.mean == 3.25
    assert est.stderr == 0.0
    assert est.n == 640 and est.batches == 64 and est.valid


def test_too_few_samples():
    with pytest.raises(InvalidParameterError):
        batch_means(np.zeros(100), batches=64)


def test_iid_stderr_matches_clt():
    n = 64 * 1000
    z = normals_at(11, 0, 0, 0, n)
    est = batch_means(z, batches=64)
    expected = 1.0 / np.sqrt(n)
    assert expected / 1.5 <= est.stderr <= expected * 1.5
    assert abs(est.mean) <= 4.0 * expected


def test_ar1_stderr_matches_analytic():
    # x_t = rho x_{t-1} + eps, known asymptotic variance of the mean:
    # sigma_eps^2 / (1 - rho)^2 / n
    rho, n = 0.6, 64 * 2000
    eps = normals_at(13, 0, 0, 0, n)
    x = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = rho * acc + eps[i]
        x[i] = acc
    est = batch_means(x, batches=64)
    analytic = np.sqrt(1.0 / (1.0 - rho) ** 2 / n)
    assert analytic / 2.0 <= est.stderr <= analytic * 2.0


def test_accumulator_matches_batch_means():
    z = normals_at(17, 0, 0, 0, 6400) * 2.0 + 0.3
    ref = batch_means(z, batches=64)
    acc = BatchAccumulator(1, 6400, batches=64)
    # feed in awkward chunk sizes
    i = 0
    for size in (1, 7, 700, 2500, 3192):
        acc.add_block(z[None, i:i + size])
        i += size
    est = acc.estimates()[0]
    assert est.mean == ref.mean and est.stderr == ref.stderr and est.n == ref.n


def test_accumulator_invalid_when_underfed():
    acc = BatchAccumulator(1, 6400, batches=64)
    acc.add_block(np.zeros((1, 100)))
    assert not acc.estimates()[0].valid


def test_trailing_remainder_dropped():
    data = np.concatenate([np.zeros(640), np.full(7, 1e9)])
    est = batch_means(data, batches=64)
    assert est.mean == 0.0 and est.n == 640
