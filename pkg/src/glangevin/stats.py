"""Monte Carlo moment estimates with batch-means standard errors.

A long correlated chain is split into ``batches`` equal blocks; the
dispersion of block means estimates the asymptotic variance of the
overall mean without modeling the autocorrelation explicitly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class MomentEstimate:
    """Mean of an observable with a batch-means standard error.

    ``valid`` is False when the producing chain diverged or yielded too
    few samples; invalid estimates must never be averaged into results.
    """

    mean: float
    stderr: float
    n: int
    batches: int
    valid: bool = True

    @staticmethod
    def invalid():
        return MomentEstimate(mean=float("nan"), stderr=float("nan"),
                              n=0, batches=0, valid=False)


def batch_means(samples, batches=64):
    """Batch-means estimate from an in-memory sample array.

    Requires n >= 2 * batches; the trailing n mod batches samples are
    discarded so every block has equal length.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if batches < 1:
        raise InvalidParameterError("batches must be >= 1")
    if n < 2 * batches:
        raise InvalidParameterError(
            f"need at least {2 * batches} samples for {batches} batches, got {n}")
    blen = n // batches
    used = blen * batches
    block = samples[:used].reshape(batches, blen).mean(axis=1)
    return _from_block_means(block, used)


def _from_block_means(block, n_used):
    batches = block.size
    mean = float(block.mean())
    if batches > 1:
        stderr = float(block.std(ddof=1) / np.sqrt(batches))
    else:
        stderr = 0.0
    return MomentEstimate(mean=mean, stderr=stderr, n=int(n_used), batches=int(batches))


class BatchAccumulator:
    """Single-pass accumulator of per-batch sums for several observables.

    The total number of post-burn-in samples must be declared up front
    so batch boundaries are fixed; chunked producers then feed values in
    order via ``add_block``.
    """

    def __init__(self, n_observables, total_samples, batches=64):
        if batches < 1:
            raise InvalidParameterError("batches must be >= 1")
        self.batches = int(batches)
        self.total = int(total_samples)
        self.batch_len = self.total // self.batches
        self.used = self.batch_len * self.batches
        self.sums = np.zeros((int(n_observables), self.batches))
        self.count = 0

    @property
    def enough_samples(self):
        return self.total >= 2 * self.batches

    def add_block(self, values):
        """values: array (n_observables, k) of the next k samples in order."""
        values = np.asarray(values, dtype=np.float64)
        k = values.shape[1]
        idx = np.arange(self.count, self.count + k)
        keep = idx < self.used
        if np.any(keep):
            bins = idx[keep] // self.batch_len
            for i in range(self.sums.shape[0]):
                # np.add.at applies repeated indices sequentially, matching
                # the per-sample accumulation order of the fast kernels
                np.add.at(self.sums[i], bins, values[i, keep])
        self.count += k

    def estimates(self):
        if not self.enough_samples or self.count < self.total:
            return [MomentEstimate.invalid() for _ in range(self.sums.shape[0])]
        block = self.sums / self.batch_len
        return [_from_block_means(block[i], self.used) for i in range(block.shape[0])]


def estimates_from_batch_sums(batch_sums, batch_len, batches):
    """Estimates from externally accumulated per-batch sums (fast kernels)."""
    block = np.asarray(batch_sums, dtype=np.float64) / batch_len
    return [_from_block_means(block[i], batch_len * batches)
            for i in range(block.shape[0])]
