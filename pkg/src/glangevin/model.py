"""Phase-space states, mass matrices, potentials, and Hamiltonian systems.

The dynamics live on R^{2n} with separable Hamiltonian

    H(q, p) = 1/2 p^T M^{-1} p + U(q),

where M is a symmetric positive definite mass matrix and U a smooth
potential.  The stationary law targeted by the samplers is the Gibbs
measure with density proportional to exp(-beta * H).
"""

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError

_SYM_TOL = 1e-12


class PhaseState:
    """Immutable position/momentum pair (q, p), each a length-n vector."""

    __slots__ = ("q", "p")

    def __init__(self, q, p):
        q = np.atleast_1d(np.asarray(q, dtype=np.float64)).copy()
        p = np.atleast_1d(np.asarray(p, dtype=np.float64)).copy()
        if q.ndim != 1 or p.ndim != 1 or q.shape != p.shape or q.size < 1:
            raise DimensionMismatchError(
                f"q and p must be equal-length vectors, got {q.shape} and {p.shape}")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def __setattr__(self, name, value):
        raise AttributeError("PhaseState is immutable")

    @property
    def dim(self):
        return self.q.size

    def is_finite(self):
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))

    def flip_momentum(self):
        return PhaseState(self.q, -self.p)

    def __repr__(self):
        return f"PhaseState(q={self.q!r}, p={self.p!r})"

    def __eq__(self, other):
        return (isinstance(other, PhaseState)
                and np.array_equal(self.q, other.q)
                and np.array_equal(self.p, other.p))


class MassMatrix:
    """Symmetric positive definite mass matrix with a storage hint.

    Three storage classes are supported so that the common scalar and
    diagonal cases stay O(n) per operation:

    - ``"scalar"``: M = m * I
    - ``"diagonal"``: M = diag(d)
    - ``"dense"``: general SPD matrix

    Construction validates symmetry (1e-12 relative) and strict
    positivity of all eigenvalues.
    """

    __slots__ = ("storage", "n", "_m", "_diag", "_dense", "_eigvals", "_eigvecs")

    def __init__(self, *, storage, n, m=None, diag=None, dense=None):
        self.storage = storage
        self.n = int(n)
        self._m = m
        self._diag = diag
        self._dense = dense
        self._eigvals = None
        self._eigvecs = None

    @classmethod
    def scalar(cls, m, n):
        m = float(m)
        if not np.isfinite(m) or m <= 0.0:
            raise InvalidParameterError(f"scalar mass must be finite and positive, got {m}")
        if n < 1:
            raise InvalidParameterError("dimension must be >= 1")
        return cls(storage="scalar", n=n, m=m)

    @classmethod
    def diagonal(cls, diag):
        diag = np.asarray(diag, dtype=np.float64).copy()
        if diag.ndim != 1 or diag.size < 1:
            raise InvalidParameterError("diagonal mass needs a 1-d entry vector")
        if not np.all(np.isfinite(diag)) or np.any(diag <= 0.0):
            raise InvalidParameterError("diagonal mass entries must be finite and positive")
        diag.flags.writeable = False
        return cls(storage="diagonal", n=diag.size, diag=diag)

    @classmethod
    def dense(cls, matrix):
        a = np.asarray(matrix, dtype=np.float64).copy()
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidParameterError("dense mass must be a square matrix")
        if not np.all(np.isfinite(a)):
            raise InvalidParameterError("dense mass entries must be finite")
        scale = np.linalg.norm(a)
        if np.linalg.norm(a - a.T) > _SYM_TOL * max(scale, 1.0):
            raise InvalidParameterError("mass matrix is not symmetric to 1e-12 relative")
        a = 0.5 * (a + a.T)
        w, v = np.linalg.eigh(a)
        if np.any(w <= 0.0):
            raise InvalidParameterError("mass matrix is not positive definite")
        a.flags.writeable = False
        obj = cls(storage="dense", n=a.shape[0], dense=a)
        obj._eigvals = w
        obj._eigvecs = v
        return obj

    @classmethod
    def identity(cls, n):
        return cls.scalar(1.0, n)

    def as_matrix(self):
        if self.storage == "scalar":
            return self._m * np.eye(self.n)
        if self.storage == "diagonal":
            return np.diag(self._diag)
        return np.array(self._dense)

    @property
    def is_scalar(self):
        return self.storage == "scalar"

    @property
    def scalar_value(self):
        if self.storage != "scalar":
            raise InvalidParameterError("mass is not a scalar multiple of the identity")
        return self._m

    def diagonal_entries(self):
        """Mass eigenvalue per coordinate for scalar/diagonal storage."""
        if self.storage == "scalar":
            return np.full(self.n, self._m)
        if self.storage == "diagonal":
            return np.array(self._diag)
        raise InvalidParameterError("dense mass has no per-coordinate diagonal")

    def eigensystem(self):
        """(eigenvalues, eigenvectors) of M; identity eigenvectors for scalar/diagonal."""
        if self.storage == "scalar":
            return np.full(self.n, self._m), np.eye(self.n)
        if self.storage == "diagonal":
            return np.array(self._diag), np.eye(self.n)
        return self._eigvals, self._eigvecs

    def apply_inverse(self, p):
        """M^{-1} p."""
        p = np.asarray(p, dtype=np.float64)
        if p.shape[-1] != self.n:
            raise DimensionMismatchError(f"vector of length {p.shape[-1]} vs mass n={self.n}")
        if self.storage == "scalar":
            return p * (1.0 / self._m)
        if self.storage == "diagonal":
            return p / self._diag
        return np.linalg.solve(self._dense, p)

    def inverse_quadratic(self, p):
        """p^T M^{-1} p (twice the kinetic energy)."""
        return float(np.dot(p, self.apply_inverse(p)))


class Potential:
    """Behavioral interface: a potential supplies value(q) and gradient(q).

    Subclasses must keep ``gradient`` consistent with ``value``; the test
    suite enforces a central finite-difference match on random points.
    """

    name = "potential"
    dim = None  # None means any dimension

    def value(self, q):
        raise NotImplementedError

    def gradient(self, q):
        raise NotImplementedError

    def _check_dim(self, q):
        if self.dim is not None and q.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"potential '{self.name}' is {self.dim}-dimensional, got {q.shape[-1]}")


class Harmonic(Potential):
    """U(q) = 1/2 |q|^2 in any dimension."""

    name = "harmonic"

    def value(self, q):
        q = np.asarray(q, dtype=np.float64)
        return 0.5 * float(np.dot(q, q))

    def gradient(self, q):
        return np.asarray(q, dtype=np.float64).copy()


class DoubleWell(Potential):
    """U(q) = q^4/4 - q^2/2 on the line (wells at q = +-1, barrier at 0)."""

    name = "double-well"
    dim = 1

    def value(self, q):
        q = np.asarray(q, dtype=np.float64)
        self._check_dim(q)
        v = q[0]
        return 0.25 * (v * v) * (v * v) - 0.5 * (v * v)

    def gradient(self, q):
        q = np.asarray(q, dtype=np.float64)
        self._check_dim(q)
        v = q[0]
        # written as v*v*v so the numba fast path is bit-identical
        return np.array([v * v * v - v])


class Polynomial(Potential):
    """1-d polynomial potential U(q) = sum_k coeffs[k] q^k (ascending powers)."""

    name = "polynomial"
    dim = 1

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.float64).copy()
        if coeffs.ndim != 1 or coeffs.size < 1 or not np.all(np.isfinite(coeffs)):
            raise InvalidParameterError("polynomial coefficients must be a finite 1-d list")
        self.coeffs = coeffs
        self.dcoeffs = np.polynomial.polynomial.polyder(coeffs) if coeffs.size > 1 \
            else np.zeros(1)

    def value(self, q):
        q = np.asarray(q, dtype=np.float64)
        self._check_dim(q)
        return float(np.polynomial.polynomial.polyval(q[0], self.coeffs))

    def gradient(self, q):
        q = np.asarray(q, dtype=np.float64)
        self._check_dim(q)
        return np.array([np.polynomial.polynomial.polyval(q[0], self.dcoeffs)])


_POTENTIALS = {
    "harmonic": lambda params: Harmonic(),
    "double-well": lambda params: DoubleWell(),
    "polynomial": lambda params: Polynomial(params),
}


def potential_by_name(name, params=None):
    """Look up a shipped potential by its CLI name."""
    try:
        factory = _POTENTIALS[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown potential '{name}' (choose from {sorted(_POTENTIALS)})") from None
    return factory(params)


class HamiltonianSystem:
    """A mass matrix plus a potential; hosts the energy H(q,p).

    Parameters
    ----------
    mass : MassMatrix
    potential : Potential
    """

    def __init__(self, mass, potential):
        if potential.dim is not None and potential.dim != mass.n:
            raise DimensionMismatchError(
                f"potential dimension {potential.dim} vs mass dimension {mass.n}")
        self.mass = mass
        self.potential = potential
        self.n = mass.n

    def check_state(self, x):
        if x.dim != self.n:
            raise DimensionMismatchError(f"state dimension {x.dim} vs system n={self.n}")

    def hamiltonian_energy(self, x):
        """H(q, p) = 1/2 p^T M^{-1} p + U(q)."""
        self.check_state(x)
        return 0.5 * self.mass.inverse_quadratic(x.p) + self.potential.value(x.q)

    def gibbs_log_density_unnormalized(self, beta, x):
        """log of the (unnormalized) Gibbs density: -beta * H(q, p)."""
        if not beta > 0.0:
            raise InvalidParameterError(f"beta must be positive, got {beta}")
        return -beta * self.hamiltonian_energy(x)

    def grad_potential(self, q):
        return self.potential.gradient(q)


def hamiltonian_energy(system, x):
    return system.hamiltonian_energy(x)


def gibbs_log_density_unnormalized(system, beta, x):
    return system.gibbs_log_density_unnormalized(beta, x)


def gradient_check(potential, q, rel_tol=1e-6):
    """Central-difference check of gradient(q) against value.

    Step eps = 1e-5 * (1 + |q_i|) per coordinate.  Returns the worst
    relative deviation |grad_i - fd_i| / (1 + |grad_i|).
    """
    q = np.asarray(q, dtype=np.float64)
    g = potential.gradient(q)
    worst = 0.0
    for i in range(q.size):
        eps = 1e-5 * (1.0 + abs(q[i]))
        qp = q.copy(); qp[i] += eps
        qm = q.copy(); qm[i] -= eps
        fd = (potential.value(qp) - potential.value(qm)) / (2.0 * eps)
        worst = max(worst, abs(g[i] - fd) / (1.0 + abs(g[i])))
    return worst
