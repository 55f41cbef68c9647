"""Exact Ornstein-Uhlenbeck flow of the friction + noise factor.

The momentum SDE  dP = -gamma M^{-1} P dt + sqrt(2 gamma / beta) dW
(positions frozen) has the exact one-step solution map

    (q, p) -> (q, E p + A xi),   xi ~ N(0, I),

with decay E = exp(-gamma M^{-1} h), covariance

    Sigma_h = (1/beta) (I - exp(-2 gamma M^{-1} h)) M,

and A the lower Cholesky factor of Sigma_h.  The map preserves the
Gibbs momentum marginal N(0, M/beta) exactly; at matrix level

    E (M/beta) E^T + Sigma_h = M/beta

holds algebraically, and the tests enforce it to 1e-10 relative.

Sigma_h is evaluated in cancellation-safe form
beta^{-1} * (-expm1(-2 gamma h / lambda)) * lambda per mass eigenvalue
lambda, since 1 - exp(-x) loses precision for small x.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateCovarianceError, DimensionMismatchError,
                     InvalidParameterError)
from .model import MassMatrix, PhaseState


def spd_matrix_function(mass, fn):
    """f(M^{-1}) for an SPD mass matrix, applied through its eigenvalues.

    ``fn`` receives the eigenvalues of M^{-1} (reciprocal mass
    eigenvalues, vectorized) and must return positive values.  Scalar
    and diagonal storage evaluate elementwise; dense storage goes
    through the symmetric eigendecomposition of M.
    """
    if mass.storage == "scalar":
        return float(fn(np.array([1.0 / mass.scalar_value]))[0]) * np.eye(mass.n)
    if mass.storage == "diagonal":
        return np.diag(fn(1.0 / mass.diagonal_entries()))
    w, v = mass.eigensystem()
    return (v * fn(1.0 / w)) @ v.T


@dataclass(frozen=True, eq=False)
class OUOperator:
    """Precomputed exact OU step: decay matrix, covariance, Cholesky factor.

    Attributes
    ----------
    gamma, beta, h : float
        Friction, inverse temperature, step size (all positive).
    mass : MassMatrix
    decay : ndarray (n, n)
        exp(-gamma M^{-1} h).
    sigma : ndarray (n, n)
        Sigma_h, SPD.
    chol : ndarray (n, n)
        Lower triangular with chol @ chol.T = sigma.
    """

    gamma: float
    beta: float
    h: float
    mass: MassMatrix
    decay: np.ndarray
    sigma: np.ndarray
    chol: np.ndarray

    @property
    def n(self):
        return self.mass.n


def build_ou_operator(gamma, beta, mass, h):
    """Assemble the exact OU one-step operator for step size h."""
    if not (gamma > 0.0 and np.isfinite(gamma)):
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    if not (beta > 0.0 and np.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive, got {beta}")
    if not (h > 0.0 and np.isfinite(h)):
        raise InvalidParameterError(f"step size must be positive, got {h}")
    if not isinstance(mass, MassMatrix):
        raise InvalidParameterError("mass must be a MassMatrix")

    decay = spd_matrix_function(mass, lambda lam_inv: np.exp(-gamma * h * lam_inv))

    def sigma_eigs(lam_inv):
        return (-np.expm1(-2.0 * gamma * h * lam_inv)) / (beta * lam_inv)

    if mass.storage == "scalar":
        sig_val = sigma_eigs(np.array([1.0 / mass.scalar_value]))[0]
        sigma = sig_val * np.eye(mass.n)
        if not sig_val > 0.0:
            raise DegenerateCovarianceError(f"Sigma_h underflowed at h={h}", h=h)
        chol = np.sqrt(sig_val) * np.eye(mass.n)
    elif mass.storage == "diagonal":
        sig_diag = sigma_eigs(1.0 / mass.diagonal_entries())
        if not np.all(sig_diag > 0.0):
            raise DegenerateCovarianceError(f"Sigma_h underflowed at h={h}", h=h)
        sigma = np.diag(sig_diag)
        chol = np.diag(np.sqrt(sig_diag))
    else:
        w, v = mass.eigensystem()
        sigma = (v * sigma_eigs(1.0 / w)) @ v.T
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise DegenerateCovarianceError(
                f"Sigma_h is not numerically SPD at h={h}", h=h) from None
    return OUOperator(gamma=float(gamma), beta=float(beta), h=float(h),
                      mass=mass, decay=decay, sigma=sigma, chol=chol)


def ou_step(op, x, xi):
    """Exact OU update: q unchanged, p' = decay @ p + chol @ xi.

    The noise vector xi is supplied by the caller, so the map is a
    deterministic function of (state, noise).
    """
    xi = np.asarray(xi, dtype=np.float64)
    if x.dim != op.n or xi.shape != (op.n,):
        raise DimensionMismatchError(
            f"state dim {x.dim}, noise shape {xi.shape}, operator n={op.n}")
    p = op.decay @ x.p + op.chol @ xi
    return PhaseState(x.q, p)


def ou_transition_density(op, p0, p1):
    """Gaussian transition density of the OU momentum update.

    Density of p1 given p0: normal with mean decay @ p0 and covariance
    Sigma_h, using the standard normalization
    (2 pi)^{-n/2} det(Sigma_h)^{-1/2}.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    if p0.shape != (op.n,) or p1.shape != (op.n,):
        raise DimensionMismatchError("momentum vectors must have the operator dimension")
    resid = p1 - op.decay @ p0
    # solve via the stored Cholesky factor
    y = np.linalg.solve(op.chol, resid)
    quad = float(np.dot(y, y))
    logdet = 2.0 * float(np.sum(np.log(np.diag(op.chol))))
    logdens = -0.5 * (op.n * np.log(2.0 * np.pi) + logdet + quad)
    return float(np.exp(logdens))


def gibbs_preservation_defect(op):
    """Relative residual of decay (M/beta) decay^T + Sigma_h = M/beta."""
    m_over_beta = op.mass.as_matrix() / op.beta
    resid = op.decay @ m_over_beta @ op.decay.T + op.sigma - m_over_beta
    return float(np.linalg.norm(resid) / np.linalg.norm(m_over_beta))
