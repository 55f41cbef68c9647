"""Deterministic, addressable Gaussian noise built on Philox4x32-10.

Every normal variate in the package is addressed by four integers
(seed, chain, domain, index) and is produced by the counter-based
Philox4x32-10 generator (Salmon et al., SC'11) followed by a Box-Muller
transform.  The mapping is

    key     = (seed & 0xffffffff, seed >> 32)
    counter = (block & 0xffffffff, block >> 32, domain, chain)

where ``block = index // 2``; each 128-bit Philox output yields two
53-bit uniforms and hence one Box-Muller pair.  Identical addresses give
identical 32-bit output words on every platform; the float conversion is
plain IEEE-754 arithmetic on top of those words.

Distinct chains and distinct domains index disjoint counter blocks, so
parallel chains and dyadic noise refinement never collide with (or
perturb) each other's draws.
"""

import numpy as np

from .errors import InvalidParameterError

U64 = np.uint64
_M32 = U64(0xFFFFFFFF)
_SH32 = U64(32)
_SH11 = U64(11)
_MUL0 = U64(0xD2511F53)
_MUL1 = U64(0xCD9E8D57)
_WEYL0 = U64(0x9E3779B9)
_WEYL1 = U64(0xBB67AE85)
_ROUNDS = 10
_TWO_NEG53 = 2.0 ** -53
_TWO_PI = 2.0 * np.pi

#: counter domains reserved by the package
CHAIN_DOMAIN = 0          # sequential per-step chain noise
REFINE_DOMAIN_BASE = 1    # dyadic refinement level L draws from 1 + L


def philox4x32(counter, key):
    """One Philox4x32-10 block: 4 u32 counter words, 2 u32 key words -> 4 u32 words.

    Accepts scalars or broadcastable uint64 arrays holding u32 values.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=U64) for c in counter)
    k0 = np.asarray(key[0], dtype=U64)
    k1 = np.asarray(key[1], dtype=U64)
    for _ in range(_ROUNDS):
        p0 = _MUL0 * c0
        p1 = _MUL1 * c2
        c0, c1, c2, c3 = (p1 >> _SH32) ^ c1 ^ k0, p1 & _M32, (p0 >> _SH32) ^ c3 ^ k1, p0 & _M32
        k0 = (k0 + _WEYL0) & _M32
        k1 = (k1 + _WEYL1) & _M32
    return c0, c1, c2, c3


def _blocks_to_normals(w0, w1, w2, w3):
    # two 53-bit uniforms in (0,1) per block, then one Box-Muller pair
    u1 = ((((w0 << _SH32) | w1) >> _SH11).astype(np.float64) + 0.5) * _TWO_NEG53
    u2 = ((((w2 << _SH32) | w3) >> _SH11).astype(np.float64) + 0.5) * _TWO_NEG53
    r = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    out = np.empty(u1.shape[:-1] + (2 * u1.shape[-1],))
    out[..., 0::2] = r * np.cos(ang)
    out[..., 1::2] = r * np.sin(ang)
    return out


def normals_at(seed, chain, domain, start, count):
    """Standard normal variates at addresses start..start+count-1.

    Pure function of the address; vectorized over ``count``.
    """
    if count < 0:
        raise InvalidParameterError("count must be nonnegative")
    if count == 0:
        return np.empty(0)
    first = start // 2
    last = (start + count - 1) // 2
    blocks = np.arange(first, last + 1, dtype=U64)
    z = _raw_normals(seed, chain, domain, blocks)
    lo = start - 2 * first
    return z[lo:lo + count]


def normals_chains(seed, chains, domain, start, count):
    """Normals for many chains at once; returns shape (len(chains), count)."""
    chains = np.asarray(chains, dtype=U64).reshape(-1, 1)
    first = start // 2
    last = (start + count - 1) // 2
    blocks = np.arange(first, last + 1, dtype=U64).reshape(1, -1)
    z = _raw_normals(seed, chains, domain, blocks)
    lo = start - 2 * first
    return z[:, lo:lo + count]


def _raw_normals(seed, chain, domain, blocks):
    seed = U64(seed & 0xFFFFFFFFFFFFFFFF)
    counter = (blocks & _M32, (blocks >> _SH32) & _M32,
               np.asarray(U64(domain)), np.asarray(chain, dtype=U64) & _M32)
    key = (seed & _M32, (seed >> _SH32) & _M32)
    return _blocks_to_normals(*philox4x32(counter, key))


class NoiseStream:
    """Stateful cursor over one chain's sequential noise stream.

    Parameters
    ----------
    seed : int
        64-bit experiment seed; shared by all chains of one experiment.
    chain : int
        Chain index; distinct chains yield independent streams.
    counter : int, optional
        Starting variate index (default 0).
    """

    def __init__(self, seed, chain=0, counter=0):
        if not 0 <= int(seed) < 2 ** 64:
            raise InvalidParameterError("seed must fit in 64 bits")
        if not 0 <= int(chain) < 2 ** 32:
            raise InvalidParameterError("chain index must fit in 32 bits")
        self.seed = int(seed)
        self.chain = int(chain)
        self.counter = int(counter)

    def standard_normals(self, count):
        """Draw ``count`` sequential N(0,1) variates and advance the cursor."""
        z = normals_at(self.seed, self.chain, CHAIN_DOMAIN, self.counter, count)
        self.counter += count
        return z

    def spawn(self, chain):
        """Independent stream for another chain index under the same seed."""
        return NoiseStream(self.seed, chain)
