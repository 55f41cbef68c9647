"""Numba kernels for the scalar-mass, one-dimensional chain hot loop.

The kernels consume pre-generated noise chunks (see ``noise``) and do
exactly the same float64 arithmetic, in the same order, as the generic
numpy path in ``gla``; the test suite asserts bit-identical results.
Potentials are dispatched by integer tag: 0 harmonic, 1 double well,
2 polynomial (Horner on the derivative coefficients).
"""

import numpy as np
from numba import njit

POT_HARMONIC = 0
POT_DOUBLE_WELL = 1
POT_POLYNOMIAL = 2

OBS_Q2 = 0
OBS_P2 = 1
OBS_QP = 2
OBS_Q = 3
OBS_P = 4

OBSERVABLE_IDS = {"q2": OBS_Q2, "p2": OBS_P2, "qp": OBS_QP, "q": OBS_Q, "p": OBS_P}
POTENTIAL_IDS = {"harmonic": POT_HARMONIC, "double-well": POT_DOUBLE_WELL,
                 "polynomial": POT_POLYNOMIAL}


@njit(inline="always")
def _grad(pot_id, pcoef, q):
    if pot_id == POT_HARMONIC:
        return q
    if pot_id == POT_DOUBLE_WELL:
        return q * q * q - q
    g = 0.0
    for i in range(pcoef.shape[0] - 1, -1, -1):
        g = g * q + pcoef[i]
    return g


@njit(inline="always")
def _obs_value(obs_id, q, p):
    if obs_id == OBS_Q2:
        return q * q
    if obs_id == OBS_P2:
        return p * p
    if obs_id == OBS_QP:
        return q * p
    if obs_id == OBS_Q:
        return q
    return p


@njit(cache=True, nogil=True)
def chain_chunk(q, p, h, minv, decay, amp, cs, ds, kick_first, pot_id, pcoef,
                xi, step0, burn_in, batch_len, used, obs_ids, bsums):
    """Advance the chain through one noise chunk, accumulating batch sums.

    Returns (q, p, diverged_step); diverged_step is -1 when the chunk
    completed, otherwise the 0-based index of the offending step.
    """
    nstages = cs.shape[0]
    nobs = obs_ids.shape[0]
    for i in range(xi.shape[0]):
        k = step0 + i
        p = decay * p + amp * xi[i]
        if kick_first:
            for s in range(nstages):
                if cs[s] != 0.0:
                    p = p - (cs[s] * h) * _grad(pot_id, pcoef, q)
                if ds[s] != 0.0:
                    q = q + (ds[s] * h) * (minv * p)
        else:
            for s in range(nstages):
                if ds[s] != 0.0:
                    q = q + (ds[s] * h) * (minv * p)
                if cs[s] != 0.0:
                    p = p - (cs[s] * h) * _grad(pot_id, pcoef, q)
        if not (np.isfinite(q) and np.isfinite(p)) or abs(q) > 1e8 or abs(p) > 1e8:
            return q, p, k
        if k >= burn_in:
            srel = k - burn_in
            if srel < used:
                b = srel // batch_len
                for j in range(nobs):
                    bsums[j, b] += _obs_value(obs_ids[j], q, p)
    return q, p, -1


@njit(cache=True, nogil=True)
def sample_chunk(q, p, h, minv, decay, amp, cs, ds, kick_first, pot_id, pcoef,
                 xi, step0, stride, out, filled):
    """Advance the chain, recording (step, q, p) every ``stride`` steps."""
    nstages = cs.shape[0]
    for i in range(xi.shape[0]):
        k = step0 + i
        p = decay * p + amp * xi[i]
        if kick_first:
            for s in range(nstages):
                if cs[s] != 0.0:
                    p = p - (cs[s] * h) * _grad(pot_id, pcoef, q)
                if ds[s] != 0.0:
                    q = q + (ds[s] * h) * (minv * p)
        else:
            for s in range(nstages):
                if ds[s] != 0.0:
                    q = q + (ds[s] * h) * (minv * p)
                if cs[s] != 0.0:
                    p = p - (cs[s] * h) * _grad(pot_id, pcoef, q)
        if not (np.isfinite(q) and np.isfinite(p)) or abs(q) > 1e8 or abs(p) > 1e8:
            return q, p, k, filled
        if (k + 1) % stride == 0:
            out[filled, 0] = k
            out[filled, 1] = q
            out[filled, 2] = p
            filled += 1
    return q, p, -1, filled
