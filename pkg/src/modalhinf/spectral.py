"""Eigenstructure of the dissipative spatial operator and Galerkin reduction.

The built-in plant is the Kuramoto-Sivashinsky operator -G d^4/dz^4 - d^2/dz^2
on [-pi, pi] with periodic boundary conditions, restricted to the odd
(sine) subspace: eigenvalues lambda_j = -G j^4 + j^2 with orthonormal
eigenfunctions phi_j(z) = sin(j z)/sqrt(pi).  Retaining the leading n
modes gives the slow design model; the next N-n modes form the fast
complement used by the closed-loop simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

DOMAIN = (-np.pi, np.pi)
SQRT_PI = np.sqrt(np.pi)

# Gauss-Legendre rule used for every distributed-shape / initial-field
# projection.  400 nodes: doubling changes results by < 1e-10 for the
# mode counts this package targets (checked in the test suite).
QUAD_NODES = 400

KAPPA1_FLOOR = 1e-12


class ReductionError(ValueError):
    """Slow/fast split is invalid: lambda_{n+1} >= 0 or epsilon >= 1."""


@dataclass(frozen=True)
class OperatorSpec:
    """Parameters of the spatial operator and its input/disturbance devices."""

    instability: float
    n_slow: int
    n_total: int
    actuator_locations: tuple[float, ...]
    disturbance_locations: tuple[float, ...]
    input_gain: float = 1.0
    disturbance_gain: float = 1.0

    def __post_init__(self):
        if self.n_slow < 1:
            raise ValueError("n_slow must be >= 1")
        if self.n_total < self.n_slow:
            raise ValueError("n_total must be >= n_slow")
        lo, hi = DOMAIN
        for z in tuple(self.actuator_locations) + tuple(self.disturbance_locations):
            if not lo < z < hi:
                raise ValueError(f"device location {z} outside open domain ({lo}, {hi})")


@dataclass(frozen=True)
class Eigensystem:
    """Sorted eigenvalues of the operator plus the time-scale separation ratio."""

    eigenvalues: np.ndarray  # lambda_1..lambda_N, non-increasing
    n_slow: int
    epsilon: float

    @property
    def n_total(self) -> int:
        return self.eigenvalues.size

    def basis(self, j: int, z) :
        """Orthonormal eigenfunction phi_j evaluated at z (1-based mode index)."""
        return np.sin(j * np.asarray(z, dtype=float)) / SQRT_PI


@dataclass(frozen=True)
class ModalSystem:
    """Slow/fast modal ODE data obtained from the Galerkin projection.

    A_s and A_f are stored as their diagonals.  kappa1 is the Lipschitz-type
    bound on the slow nonlinearity, valid on the ball of radius
    kappa1_radius around the origin; it is attached after construction.
    """

    a_slow: np.ndarray           # diag(A_s), length n
    a_fast: np.ndarray           # diag(A_f), length N-n
    b_u_slow: np.ndarray         # n x q_u
    b_u_fast: np.ndarray         # (N-n) x q_u
    b_w_slow: np.ndarray         # n x q_w
    b_w_fast: np.ndarray         # (N-n) x q_w
    x_slow_0: np.ndarray
    x_fast_0: np.ndarray
    eig: Eigensystem
    kappa1: float | None = None
    kappa1_radius: float | None = None

    @property
    def n_slow(self) -> int:
        return self.a_slow.size

    @property
    def n_total(self) -> int:
        return self.a_slow.size + self.a_fast.size

    @property
    def q_u(self) -> int:
        return self.b_u_slow.shape[1]

    @property
    def q_w(self) -> int:
        return self.b_w_slow.shape[1]

    def with_kappa1(self, kappa1: float, radius: float) -> "ModalSystem":
        return replace(self, kappa1=float(kappa1), kappa1_radius=float(radius))


def kse_eigenvalue(instability: float, j) :
    """Closed-form eigenvalue -G j^4 + j^2 of the KSE operator."""
    j = np.asarray(j, dtype=float)
    return -instability * j**4 + j**2


def eigenpairs(spec: OperatorSpec) -> Eigensystem:
    """Eigen-decomposition of the operator restricted to the first n_total modes.

    epsilon = |lambda_L| / |lambda_{n+1}| with lambda_L the largest nonzero
    eigenvalue.  Raises ReductionError when the split does not produce an
    exponentially stable fast complement (lambda_{n+1} >= 0) or when the
    scales do not separate (epsilon >= 1).
    """
    n, N = spec.n_slow, spec.n_total
    lam = kse_eigenvalue(spec.instability, np.arange(1, N + 1))
    if np.any(np.diff(lam) > 0):
        raise ReductionError("eigenvalues are not non-increasing")
    lam_next = kse_eigenvalue(spec.instability, n + 1)
    if lam_next >= 0:
        raise ReductionError(f"lambda_{n+1} = {lam_next} is not negative")
    nonzero = lam[lam != 0.0]
    lam_largest = nonzero[0] if nonzero.size else 0.0
    eps = abs(lam_largest) / abs(lam_next)
    if eps >= 1.0:
        raise ReductionError(f"epsilon = {eps} >= 1: no time-scale separation")
    return Eigensystem(eigenvalues=lam, n_slow=n, epsilon=float(eps))


def quadrature_rule(nodes: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to the operator domain."""
    z, w = leggauss(nodes)
    return np.pi * z, np.pi * w


def project_point_device(location: float, gain: float, mode_count: int) -> np.ndarray:
    """Modal coefficients of a Dirac device: component j is gain * phi_j(location).

    Dirac shapes are projected by direct eigenfunction evaluation; no
    quadrature of the delta is attempted.
    """
    lo, hi = DOMAIN
    if not lo < location < hi:
        raise ValueError(f"location {location} outside open domain")
    j = np.arange(1, mode_count + 1)
    return gain * np.sin(j * location) / SQRT_PI


def project_shape(shape: Callable[[np.ndarray], np.ndarray], gain: float,
                  mode_count: int, nodes: int = QUAD_NODES) -> np.ndarray:
    """Modal coefficients of a distributed shape function via quadrature."""
    z, w = quadrature_rule(nodes)
    vals = gain * np.asarray(shape(z), dtype=float)
    j = np.arange(1, mode_count + 1)
    return (np.sin(np.outer(j, z)) / SQRT_PI) @ (w * vals)


def project_field(field: Callable[[np.ndarray], np.ndarray], mode_count: int,
                  nodes: int = QUAD_NODES) -> np.ndarray:
    """Modal coefficients x_j = <field, phi_j> of a spatial profile."""
    return project_shape(field, 1.0, mode_count, nodes)


def build_modal_system(spec: OperatorSpec,
                       initial_field: Callable[[np.ndarray], np.ndarray] | None = None,
                       ) -> ModalSystem:
    """Assemble the slow/fast modal system for the given operator.

    Input and disturbance columns come from point-device projections; the
    initial field is projected by quadrature (zero when omitted).
    """
    eig = eigenpairs(spec)
    n, N = spec.n_slow, spec.n_total

    def device_matrix(locations, gain):
        if not locations:
            return np.zeros((N, 0))
        cols = [project_point_device(z, gain, N) for z in locations]
        return np.column_stack(cols)

    b_u = device_matrix(spec.actuator_locations, spec.input_gain)
    b_w = device_matrix(spec.disturbance_locations, spec.disturbance_gain)
    if initial_field is None:
        x0 = np.zeros(N)
    else:
        x0 = project_field(initial_field, N)
    return ModalSystem(
        a_slow=eig.eigenvalues[:n].copy(),
        a_fast=eig.eigenvalues[n:].copy(),
        b_u_slow=b_u[:n], b_u_fast=b_u[n:],
        b_w_slow=b_w[:n], b_w_fast=b_w[n:],
        x_slow_0=x0[:n], x_fast_0=x0[n:],
        eig=eig,
    )


def sine_series(coefficients: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Spatial profile sum_j c_j sin(j z) from raw (unnormalized) coefficients."""
    c = np.asarray(coefficients, dtype=float)

    def field(z):
        z = np.asarray(z, dtype=float)
        j = np.arange(1, c.size + 1)
        return np.sin(np.multiply.outer(z, j)) @ c

    return field


def nonlinear_galerkin(x: np.ndarray) -> np.ndarray:
    """Galerkin projection of the KSE nonlinearity -U dU/dz onto the retained modes.

    For U = sum_j x_j sin(jz)/sqrt(pi) the product-to-sum identities give

        f_m = -(1/(2 sqrt(pi))) * ( sum_{k<m} k x_k x_{m-k}
                                    - m * sum_k x_k x_{m+k} ).

    The truncation is energy-neutral: x . f(x) = 0 exactly.
    """
    x = np.asarray(x, dtype=float)
    N = x.size
    if N == 0:
        return x.copy()
    k = np.arange(1, N + 1)
    conv = np.convolve(k * x, x)            # conv[m-2] = sum_{k<m} k x_k x_{m-k}
    first = np.zeros(N)
    first[1:] = conv[: N - 1]
    corr = np.correlate(x, x, mode="full")  # corr[N-1+m] = sum_k x_k x_{k+m}
    second = np.zeros(N)
    second[: N - 1] = corr[N:]
    second *= k
    return -(first - second) / (2.0 * SQRT_PI)


def nonlinear_galerkin_quadrature(x: np.ndarray, nodes: int = QUAD_NODES) -> np.ndarray:
    """Quadrature route for the same projection; the analytic path must match it."""
    x = np.asarray(x, dtype=float)
    N = x.size
    z, w = quadrature_rule(nodes)
    j = np.arange(1, N + 1)
    sin_jz = np.sin(np.outer(j, z)) / SQRT_PI
    cos_jz = np.cos(np.outer(j, z)) / SQRT_PI
    u = x @ sin_jz
    du = (x * j) @ cos_jz
    return sin_jz @ (w * (-u * du))


def slow_nonlinearity(x_slow: np.ndarray) -> np.ndarray:
    """f_s(x_s, 0): projection of the nonlinearity of the slow-only field."""
    return nonlinear_galerkin(x_slow)


def estimate_kappa1(system: ModalSystem, radius: float, sample_count: int = 10_000,
                    seed: int = 0) -> float:
    """Sampled bound kappa1 with ||f_s(x_s,0)|| <= kappa1 ||x_s|| on ||x_s|| <= radius.

    Directions are drawn from one generator stream so that doubling
    sample_count only extends the sample set (the estimate is monotone in
    sample_count).  Each direction is evaluated on the sphere of the given
    radius and at one random interior radius.  Returns at least
    KAPPA1_FLOOR so that a linear plant does not degenerate the synthesis.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    n = system.n_slow
    # Separate streams for directions and radii keep the first k samples
    # identical whatever sample_count is, so growing the sample set can
    # only raise the max.
    rng_dir = np.random.default_rng([seed, 0])
    rng_rad = np.random.default_rng([seed, 1])
    best = 0.0
    batch = 2048
    remaining = sample_count
    while remaining > 0:
        m = min(batch, remaining)
        u = rng_dir.standard_normal((m, n))
        norms = np.linalg.norm(u, axis=1)
        norms[norms == 0.0] = 1.0
        u /= norms[:, None]
        fractions = rng_rad.uniform(0.0, 1.0, m)
        for i in range(m):
            for r in (radius, radius * fractions[i]):
                if r == 0.0:
                    continue
                xs = r * u[i]
                ratio = np.linalg.norm(slow_nonlinearity(xs)) / r
                if ratio > best:
                    best = ratio
        remaining -= m
    return max(best, KAPPA1_FLOOR)


def default_kappa1_radius(system: ModalSystem) -> float:
    """Default estimation ball: 1.5x the initial slow-state norm (1.0 fallback)."""
    r = 1.5 * float(np.linalg.norm(system.x_slow_0))
    return r if r > 0 else 1.0


def reconstruct_field(x: np.ndarray, z_grid) -> np.ndarray:
    """Field value U(z) = sum_j x_j phi_j(z) on the given grid."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z_grid, dtype=float)
    j = np.arange(1, x.size + 1)
    return (np.sin(np.multiply.outer(z, j)) / SQRT_PI) @ x
