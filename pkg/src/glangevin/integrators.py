"""Explicit variational (symplectic) integrators for Hamilton's equations.

Every scheme is a composition of elementary kicks and drifts,

    kick(c):   p <- p - c h grad U(q)
    drift(d):  q <- q + d h M^{-1} p

with per-stage weights (c_i, d_i).  Stages apply kick-then-drift by
default; ``kick_first=False`` applies drift-then-kick, which is how the
first-order scheme is written.  The shipped schemes:

- ``euler``  (order 1): one stage, drift-then-kick
      q' = q + h M^{-1} p,  p' = p - h grad U(q')
- ``verlet`` (order 2): half-kick, full drift, half-kick
- ``neri4``  (order 4): four kick/drift stages with the Yoshida/Neri
  coefficients built from 2^(1/3).

All of these maps are symplectic, hence volume preserving; the test
suite verifies both properties numerically through ``jacobian_fd``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NonFiniteStateError
from .model import PhaseState

_CBRT2 = 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class SplittingCoefficients:
    """Kick weights c, drift weights d (equal length), declared order p.

    Consistency requires sum(c) = sum(d) = 1 to 1e-12; enforced here.
    """

    c: tuple
    d: tuple
    order: int
    kick_first: bool = True

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        d = tuple(float(v) for v in self.d)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        if len(c) != len(d) or len(c) < 1:
            raise InvalidParameterError("c and d must have equal length >= 1")
        if abs(sum(c) - 1.0) > 1e-12 or abs(sum(d) - 1.0) > 1e-12:
            raise InvalidParameterError(
                f"splitting weights must each sum to 1 (got {sum(c)!r}, {sum(d)!r})")
        if self.order < 1:
            raise InvalidParameterError("declared order must be >= 1")

    @property
    def stages(self):
        return len(self.c)


@dataclass(frozen=True)
class IntegratorScheme:
    """A named variational integrator: tag plus its splitting weights."""

    name: str
    coefficients: SplittingCoefficients

    @property
    def order(self):
        return self.coefficients.order


def _neri_coefficients():
    den = 2.0 - _CBRT2
    c1 = 1.0 / (2.0 * den)
    c2 = (1.0 - _CBRT2) / (2.0 * den)
    d1 = 1.0 / den
    d2 = -_CBRT2 / den
    return SplittingCoefficients(c=(c1, c2, c2, c1), d=(d1, d2, d1, 0.0), order=4)


SYMPLECTIC_EULER = IntegratorScheme(
    "euler", SplittingCoefficients(c=(1.0,), d=(1.0,), order=1, kick_first=False))
STORMER_VERLET = IntegratorScheme(
    "verlet", SplittingCoefficients(c=(0.5, 0.5), d=(1.0, 0.0), order=2))
NERI4 = IntegratorScheme("neri4", _neri_coefficients())

_SCHEMES = {s.name: s for s in (SYMPLECTIC_EULER, STORMER_VERLET, NERI4)}


def scheme_by_name(name):
    try:
        return _SCHEMES[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown scheme '{name}' (choose from {sorted(_SCHEMES)})") from None


def custom_scheme(c, d, order, kick_first=True, name="custom"):
    return IntegratorScheme(name, SplittingCoefficients(
        c=tuple(c), d=tuple(d), order=int(order), kick_first=kick_first))


def variational_step(scheme, system, h, x):
    """One step of the scheme's discrete Hamiltonian map.

    Raises NonFiniteStateError if the input or output state is not
    finite (explicit schemes blow up outside their stability region).
    """
    if not h > 0.0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    system.check_state(x)
    if not x.is_finite():
        raise NonFiniteStateError("nonfinite input state")
    q, p = _raw_step(scheme, system, h, x.q.copy(), x.p.copy())
    out = PhaseState(q, p)
    if not out.is_finite():
        raise NonFiniteStateError("integrator produced a nonfinite state")
    return out


def _raw_step(scheme, system, h, q, p):
    coef = scheme.coefficients
    grad = system.potential.gradient
    minv = system.mass.apply_inverse
    # zero-weight kicks/drifts are skipped: exactness and one less grad eval
    if coef.kick_first:
        for c, d in zip(coef.c, coef.d):
            if c != 0.0:
                p = p - (c * h) * grad(q)
            if d != 0.0:
                q = q + (d * h) * minv(p)
    else:
        for c, d in zip(coef.c, coef.d):
            if d != 0.0:
                q = q + (d * h) * minv(p)
            if c != 0.0:
                p = p - (c * h) * grad(q)
    return q, p


def exact_harmonic_flow(h, x, omega=1.0):
    """Exact time-h flow for U(q) = 1/2 |q|^2 with mass (1/omega^2) I.

    The pair (q, omega*p) rotates by the angle omega*h, componentwise:

        q' =  cos(omega h) q + omega sin(omega h) p
        p' = -(sin(omega h)/omega) q + cos(omega h) p

    For omega = 1 (unit mass) this is the plain phase-plane rotation.
    Energy preserving by construction; callers must hold a harmonic
    system, the map takes no Potential.
    """
    if not omega > 0.0:
        raise InvalidParameterError(f"omega must be positive, got {omega}")
    if h < 0.0:
        raise InvalidParameterError(f"flow time must be nonnegative, got {h}")
    cs = np.cos(omega * h)
    sn = np.sin(omega * h)
    q = cs * x.q + (omega * sn) * x.p
    p = (-sn / omega) * x.q + cs * x.p
    return PhaseState(q, p)


def energy_error(scheme, system, h, x):
    """H(theta_h(x)) - H(x): the per-step energy defect of the scheme."""
    return system.hamiltonian_energy(variational_step(scheme, system, h, x)) \
        - system.hamiltonian_energy(x)


def jacobian_fd(scheme, system, h, x, eps=None):
    """Central-difference Jacobian of the step map at x, shape (2n, 2n).

    Default eps = 1e-6 * (1 + |x|); an explicit eps must lie in
    [1e-8, 1e-3].
    """
    z = np.concatenate([x.q, x.p])
    if eps is None:
        eps = 1e-6 * (1.0 + float(np.linalg.norm(z)))
    elif not 1e-8 <= eps <= 1e-3:
        raise InvalidParameterError("eps must lie in [1e-8, 1e-3]")
    n2 = z.size
    n = n2 // 2
    jac = np.empty((n2, n2))
    for j in range(n2):
        zp = z.copy(); zp[j] += eps
        zm = z.copy(); zm[j] -= eps
        fp = variational_step(scheme, system, h, PhaseState(zp[:n], zp[n:]))
        fm = variational_step(scheme, system, h, PhaseState(zm[:n], zm[n:]))
        jac[:, j] = (np.concatenate([fp.q, fp.p]) - np.concatenate([fm.q, fm.p])) / (2.0 * eps)
    if not np.all(np.isfinite(jac)):
        raise NonFiniteStateError("nonfinite entries in finite-difference Jacobian")
    return jac


def canonical_symplectic_matrix(n):
    """The 2n x 2n block matrix [[0, I], [-I, 0]]."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def symplectic_defect(jac):
    """max-norm of J^T S J - S with S the canonical symplectic matrix."""
    n = jac.shape[0] // 2
    s = canonical_symplectic_matrix(n)
    return float(np.max(np.abs(jac.T @ s @ jac - s)))


def iterate_variational(scheme, system, h, x, steps):
    """Apply ``variational_step`` repeatedly; returns the final state."""
    for _ in range(int(steps)):
        x = variational_step(scheme, system, h, x)
    return x
