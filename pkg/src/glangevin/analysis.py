"""Exact and statistical accuracy analysis for the linear and 1-d cases.

For the unit-mass linear oscillator (U = q^2/2) one chain step is an
affine Gaussian recursion x' = A x + noise, so its stationary covariance
solves the discrete Lyapunov equation Sigma = A Sigma A^T + Q exactly;
no Monte Carlo is needed to measure invariant-measure errors there.
For nonlinear 1-d potentials the reference moment comes from adaptive
quadrature of the Gibbs weight, and errors are estimated from long
chains (module ``gla``) with batch-means error bars.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (InvalidParameterError, NumericError,
                     UnboundedMeasureError, UnstableSchemeError)
from .gla import run_chain
from .integrators import (exact_harmonic_flow, iterate_variational,
                          scheme_by_name, variational_step)
from .model import HamiltonianSystem, Harmonic, MassMatrix, PhaseState
from .noise import NoiseStream
from .ou import build_ou_operator
from .stats import MomentEstimate, batch_means  # re-exported; shared with gla

__all__ = [
    "GaussianMeasure", "ConvergenceRow", "MomentEstimate", "batch_means",
    "linear_scheme_matrices", "discrete_lyapunov_2x2",
    "linear_stationary_covariance", "cumulative_moment_error",
    "gibbs_moment_quadrature", "gaussian_tv_quadrature", "convergence_study",
    "observed_orders", "tv_to_gibbs_curve", "moment_error_curve",
    "local_energy_error_curve", "deterministic_global_error_curve",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GaussianMeasure:
    """A 2-d Gaussian with SPD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(2)
        cov = np.asarray(self.cov, dtype=np.float64).reshape(2, 2)
        if np.linalg.norm(cov - cov.T) > 1e-12 * max(np.linalg.norm(cov), 1.0):
            raise InvalidParameterError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.any(np.linalg.eigvalsh(cov) <= 0.0):
            raise InvalidParameterError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass
class ConvergenceRow:
    """One level of a step-halving study; order is filled between rows."""

    h: float
    steps: int
    estimate: float
    stderr: float
    error: float
    observed_order: float  # nan until the next row exists or when unreliable
    reliable: bool         # error resolved above the 3-sigma statistical floor


def _theta_matrix(scheme, h):
    """Exact 2x2 matrix of the variational step on U = q^2/2, M = 1."""
    if isinstance(scheme, str):
        if scheme in ("exact", "exact-splitting"):
            c, s = math.cos(h), math.sin(h)
            return np.array([[c, s], [-s, c]])
        scheme = scheme_by_name(scheme)
    coef = scheme.coefficients
    mat = np.eye(2)
    for c, d in zip(coef.c, coef.d):
        kick = np.array([[1.0, 0.0], [-c * h, 1.0]])
        drift = np.array([[1.0, d * h], [0.0, 1.0]])
        stage = drift @ kick if coef.kick_first else kick @ drift
        mat = stage @ mat
    return mat


def linear_scheme_matrices(scheme, h, gamma, beta):
    """(A, Q) of the affine chain recursion on the unit linear oscillator.

    One step is x' = Theta_h D x + Theta_h n with D = diag(1, e^{-gamma h})
    and n = (0, N(0, Sigma_h)), so A = Theta_h D and Q = Theta_h N Theta_h^T
    with N = diag(0, Sigma_h).  ``scheme`` is an IntegratorScheme, a scheme
    name, or "exact" for the rotation of the exact splitting.
    """
    if not (h > 0.0 and gamma > 0.0 and beta > 0.0):
        raise InvalidParameterError("h, gamma, beta must all be positive")
    theta = _theta_matrix(scheme, h)
    a_decay = math.exp(-gamma * h)
    sig = -math.expm1(-2.0 * gamma * h) / beta
    A = theta @ np.diag([1.0, a_decay])
    Q = theta @ np.diag([0.0, sig]) @ theta.T
    return A, Q


def discrete_lyapunov_2x2(A, Q):
    """Unique SPD solution of Sigma = A Sigma A^T + Q for stable 2x2 A.

    Solved directly as a 3x3 linear system on the symmetric components;
    the residual is checked against 1e-12 * ||Q||.
    """
    A = np.asarray(A, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho >= 1.0:
        raise UnstableSchemeError(
            f"one-step matrix has spectral radius {rho:.6f} >= 1; "
            "the scheme is unstable at this step size")
    a11, a12 = A[0]
    a21, a22 = A[1]
    m = np.eye(3) - np.array([
        [a11 * a11, 2.0 * a11 * a12, a12 * a12],
        [a11 * a21, a11 * a22 + a12 * a21, a12 * a22],
        [a21 * a21, 2.0 * a21 * a22, a22 * a22],
    ])
    rhs = np.array([Q[0, 0], Q[0, 1], Q[1, 1]])
    x, y, z = np.linalg.solve(m, rhs)
    sigma = np.array([[x, y], [y, z]])
    resid = np.linalg.norm(sigma - A @ sigma @ A.T - Q)
    if resid > 1e-12 * max(np.linalg.norm(Q), 1e-300):
        raise NumericError(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return sigma


def linear_stationary_covariance(scheme, h, gamma, beta):
    """Stationary (q, p) covariance of the chain on the unit linear oscillator."""
    return discrete_lyapunov_2x2(*linear_scheme_matrices(scheme, h, gamma, beta))


def cumulative_moment_error(sigma, beta):
    """|sigma_q^2 - 1/beta| + |sigma_p^2 - 1/beta| + |kappa| for a 2x2 covariance."""
    target = 1.0 / beta
    return abs(sigma[0, 0] - target) + abs(sigma[1, 1] - target) + abs(sigma[0, 1])


_OBSERVABLE_FUNCS = {
    "q2": lambda q: q * q,
    "q4": lambda q: q ** 4,
    "abs_q": np.abs,
}


def gibbs_moment_quadrature(potential, beta, observable="q2"):
    """Gibbs expectation of a 1-d observable by adaptive quadrature.

    Computes int f(q) e^{-beta U(q)} dq / int e^{-beta U(q)} dq on a
    truncated interval [-R, R].  R is grown until the Gibbs weight at
    the boundary is below e^{-46} of its peak, after first checking the
    coercivity proxy U(+-R) > U(0) + 20/beta; failure of that check
    raises UnboundedMeasureError.  Relative accuracy target: 1e-10.
    """
    if potential.dim not in (None, 1):
        raise InvalidParameterError("quadrature reference requires a 1-d potential")
    if not beta > 0.0:
        raise InvalidParameterError("beta must be positive")
    fn = _OBSERVABLE_FUNCS[observable] if isinstance(observable, str) else observable

    u = lambda v: potential.value(np.array([v]))
    u0 = u(0.0)
    radius = 1.0
    grid = np.linspace(-radius, radius, 33)
    umin = min(u(v) for v in grid)
    coercive = False
    while radius <= 1e6:
        grid = np.linspace(-radius, radius, 65)
        umin = min(umin, min(u(v) for v in grid))
        boundary = min(u(radius), u(-radius))
        if boundary > u0 + 20.0 / beta:
            coercive = True
        if beta * (boundary - umin) >= 46.0:
            break
        radius *= 2.0
    if not coercive:
        raise UnboundedMeasureError(
            "potential fails the coercivity check U(+-R) > U(0) + 20/beta "
            f"out to R = {radius:.3g}; Gibbs weight may not be normalizable")

    weight = lambda v: math.exp(-beta * (u(v) - umin))
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    den, den_err = quad(weight, -radius, radius, **opts)
    num, num_err = quad(lambda v: fn(v) * weight(v), -radius, radius, **opts)
    if den <= 0.0 or not np.isfinite(num / den):
        raise NumericError("quadrature failed to produce a finite moment")
    return num / den


def _std_cdf(t):
    return 0.5 * (1.0 + math.erf(t / _SQRT2))


def gaussian_tv_quadrature(g1, g2):
    """Total variation distance between two 2-d Gaussians, in [0, 1].

    The pair is whitened so the first becomes standard normal and the
    second diagonal; the inner integral of |phi1 - phi2| along one axis
    is then evaluated in closed form between the analytically solved
    sign-change points, and the outer axis by adaptive quadrature over
    mean +- 8 sigma.  Absolute accuracy is far below the 1e-8 contract.
    Arguments are ordered canonically first, so the distance is exactly
    symmetric.
    """
    if _canonical_key(g1) > _canonical_key(g2):
        g1, g2 = g2, g1
    # whiten g1 -> N(0, I), diagonalize the transformed g2 (TV is invariant
    # under invertible affine maps)
    w, v = np.linalg.eigh(g1.cov)
    white = (v * (w ** -0.5)) @ v.T
    b = white @ g2.cov @ white.T
    lam, rot = np.linalg.eigh(0.5 * (b + b.T))
    t = rot.T @ white
    mu = t @ (np.asarray(g2.mean) - np.asarray(g1.mean))
    l1, l2 = float(lam[0]), float(lam[1])
    if l1 <= 0.0 or l2 <= 0.0:
        raise InvalidParameterError("degenerate covariance in TV computation")
    mu1, mu2 = float(mu[0]), float(mu[1])
    s1, s2 = math.sqrt(l1), math.sqrt(l2)

    inv2l2 = 0.5 / l2
    qa = inv2l2 - 0.5                      # quadratic coefficient in y
    log_norm2 = -0.5 * math.log(l2)

    def inner(x):
        # amplitudes of the two 1-d slices at abscissa x
        log_a = -0.5 * x * x
        log_b = -0.5 * (x - mu1) ** 2 / l1 - 0.5 * math.log(l1)
        a_amp = math.exp(log_a)
        b_amp = math.exp(log_b)

        def seg(lo, hi):
            c1 = a_amp * (_std_cdf(hi) - _std_cdf(lo))
            c2 = b_amp * (_std_cdf((hi - mu2) / s2) - _std_cdf((lo - mu2) / s2))
            return abs(c1 - c2)

        # sign changes of a_amp e^{-y^2/2} - B e^{-(y-mu2)^2/(2 l2)} with
        # log B = log_b + log_norm2:
        # qa y^2 - (mu2/l2) y + mu2^2/(2 l2) + log_a - log B = 0
        qb = -mu2 / l2
        qc = mu2 * mu2 * inv2l2 + log_a - (log_b + log_norm2)
        roots = _real_roots(qa, qb, qc)
        pts = [-np.inf] + roots + [np.inf]
        return sum(seg(pts[i], pts[i + 1]) for i in range(len(pts) - 1))

    lo = min(-8.0, mu1 - 8.0 * s1)
    hi = max(8.0, mu1 + 8.0 * s1)
    # kinks of the outer integrand sit where the inner root count changes;
    # hand quad the candidate break points
    breaks = _discriminant_roots(qa, mu1, mu2, l1, l2, log_norm2)
    pts = sorted(p for p in breaks if lo < p < hi)
    val, _ = quad(inner, lo, hi, points=pts or None,
                  epsabs=1e-12, epsrel=1e-11, limit=400)
    # inner() carries densities with the 1/sqrt(2 pi) of the y-axis factored out
    return 0.5 * val / math.sqrt(2.0 * math.pi)


def _canonical_key(g):
    return (tuple(np.asarray(g.mean).ravel()), tuple(np.asarray(g.cov).ravel()))


def _real_roots(a, b, c):
    if abs(a) < 1e-300:
        if abs(b) < 1e-300:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return []
    r = math.sqrt(disc)
    return sorted(((-b - r) / (2.0 * a), (-b + r) / (2.0 * a)))


def _discriminant_roots(qa, mu1, mu2, l1, l2, log_norm2):
    # qc(x) = mu2^2/(2 l2) + log_a(x) - log_b(x) - log_norm2 is quadratic in x;
    # the inner root count changes where (mu2/l2)^2 - 4 qa qc(x) = 0
    alpha = 0.5 / l1 - 0.5
    beta_ = -mu1 / l1
    gamma_ = (mu2 * mu2 * 0.5 / l2 + 0.5 * math.log(l2) + 0.5 * math.log(l1)
              + mu1 * mu1 * 0.5 / l1)
    return _real_roots(-4.0 * qa * alpha, -4.0 * qa * beta_,
                       (mu2 / l2) ** 2 - 4.0 * qa * gamma_)


def local_energy_error_curve(scheme, h_values, states):
    """Mean per-step energy defect |H(theta_h x) - H(exact flow x)| on the
    unit harmonic oscillator, averaged over the given phase states.

    Averaging over a symmetric cloud of states is essential: at special
    points (e.g. p = 0) the leading odd term of a symmetric scheme's
    energy defect vanishes and the observed order inflates to p+2.
    """
    system = HamiltonianSystem(MassMatrix.identity(1), Harmonic())
    out = []
    for h in h_values:
        vals = []
        for x in states:
            stepped = variational_step(scheme, system, h, x)
            flowed = exact_harmonic_flow(h, x)
            vals.append(abs(system.hamiltonian_energy(stepped)
                            - system.hamiltonian_energy(flowed)))
        out.append(float(np.mean(vals)))
    return out


def deterministic_global_error_curve(scheme, h_values, total_time, x0):
    """Endpoint error of the iterated scheme against the exact harmonic
    flow at time T, on the unit oscillator; O(h^p) in the step size."""
    system = HamiltonianSystem(MassMatrix.identity(1), Harmonic())
    target = exact_harmonic_flow(total_time, x0)
    out = []
    for h in h_values:
        steps = total_time / h
        if abs(steps - round(steps)) > 1e-9:
            raise InvalidParameterError("total_time must be a multiple of every h")
        end = iterate_variational(scheme, system, h, x0, int(round(steps)))
        out.append(float(np.hypot(np.linalg.norm(end.q - target.q),
                                  np.linalg.norm(end.p - target.p))))
    return out


def observed_orders(errors):
    """log2 ratios of successive errors; nan where undefined."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a > 0.0 and b > 0.0:
            out.append(math.log2(a / b))
        else:
            out.append(float("nan"))
    return out


def moment_error_curve(scheme, gamma, beta, h_values):
    """Noise-free cumulative stationary-moment errors over a step ladder."""
    return [cumulative_moment_error(
        linear_stationary_covariance(scheme, h, gamma, beta), beta)
        for h in h_values]


def tv_to_gibbs_curve(scheme, gamma, beta, h_values):
    """Noise-free TV distances to the exact Gibbs Gaussian over a ladder."""
    target = GaussianMeasure(mean=np.zeros(2), cov=np.eye(2) / beta)
    out = []
    for h in h_values:
        sig = linear_stationary_covariance(scheme, h, gamma, beta)
        out.append(gaussian_tv_quadrature(GaussianMeasure(np.zeros(2), sig), target))
    return out


def convergence_study(scheme, system, gamma, beta, h0, n0, levels, seed,
                      reference, burn_in_fraction=0.1, x0=None, workers=1):
    """Step-halving study of the stationary q^2 moment against a reference.

    Level l runs a chain at h = h0 / 2^l for n0 * 2^l steps (halve the
    step, double the steps), estimates q^2 with batch-means error bars,
    and reports error = |estimate - reference|.  The observed order
    between consecutive levels is only reported when both errors clear
    the 3-sigma statistical floor; otherwise the row is marked
    unreliable.  Level l uses chain index l and rows are assembled in
    level order, so results are independent of worker count.
    """
    if levels < 1:
        raise InvalidParameterError("levels must be >= 1")
    if x0 is None:
        x0 = PhaseState(np.zeros(system.n), np.zeros(system.n))

    def one_level(level):
        h = h0 / (1 << level)
        steps = int(n0) * (1 << level)
        burn = int(burn_in_fraction * steps)
        ou_op = build_ou_operator(gamma, beta, system.mass, h)
        result = run_chain(scheme, system, ou_op, x0, steps, burn,
                           ["q2"], NoiseStream(seed, chain=level))
        est = result.estimates["q2"]
        if result.diverged or not est.valid:
            return ConvergenceRow(h=h, steps=steps, estimate=float("nan"),
                                  stderr=float("nan"), error=float("nan"),
                                  observed_order=float("nan"), reliable=False)
        err = abs(est.mean - reference)
        return ConvergenceRow(h=h, steps=steps, estimate=est.mean,
                              stderr=est.stderr, error=err,
                              observed_order=float("nan"),
                              reliable=err > 3.0 * est.stderr)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_level, range(levels)))
    else:
        rows = [one_level(level) for level in range(levels)]
    for prev, cur in zip(rows[:-1], rows[1:]):
        if prev.reliable and cur.reliable and cur.error > 0.0:
            cur.observed_order = math.log2(prev.error / cur.error)
    return rows
