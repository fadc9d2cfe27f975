"""Observer/controller synthesis for the slow modal system.

The augmented state stacks the slow plant modes with the per-node
estimation errors, x_tilde = [x_s; e_1; ...; e_p].  A quadratic
certificate (P, tau, rho) proves exponential stability and the
energy-gain bound gamma = sqrt(rho) from the combined disturbance
[w; v_bar] to the weighted output, provided the certificate matrix is
negative definite.  Synthesis minimizes rho over the structured gains
and the certificate by alternating between the two bilinear variable
groups, each step being a small dense semidefinite program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .network import SensorNetwork, SparsityPattern, sparsity_pattern
from .spectral import ModalSystem


class PatternViolation(ValueError):
    """A gain block sits outside the admissible sparsity structure."""


class SeedFailure(RuntimeError):
    """The feasibility phase never reached beta <= 0; no starting point."""


@dataclass(frozen=True)
class GainSet:
    """Structured gain blocks; absence of a block means it is exactly zero.

    k maps controller nodes to q_u x n feedback blocks, l maps every node
    to its n x q_y,i injection block, g_bar maps directed edges to n x n
    weighted consensus blocks (g_bar_ij = m_ij * G_ij).
    """

    k: dict[int, np.ndarray]
    l: dict[int, np.ndarray]
    g_bar: dict[tuple[int, int], np.ndarray]

    def check_pattern(self, pattern: SparsityPattern) -> None:
        if not set(self.k) <= set(pattern.k_nodes):
            raise PatternViolation(f"K blocks outside controller set: "
                                   f"{sorted(set(self.k) - set(pattern.k_nodes))}")
        if set(self.l) != set(range(1, len(pattern.l_blocks) + 1)):
            raise PatternViolation("L must carry exactly one block per node")
        if not set(self.g_bar) <= set(pattern.g_edges):
            raise PatternViolation(f"consensus blocks off the edge set: "
                                   f"{sorted(set(self.g_bar) - set(pattern.g_edges))}")

    def in_pattern(self, pattern: SparsityPattern) -> bool:
        try:
            self.check_pattern(pattern)
        except PatternViolation:
            return False
        return True

    def k_sum(self, q_u: int, n: int) -> np.ndarray:
        out = np.zeros((q_u, n))
        for blk in self.k.values():
            out = out + blk
        return out

    def k_stack(self, p: int, q_u: int, n: int) -> np.ndarray:
        """K_bar = [K_1 ... K_p] with exact zeros off the controller set."""
        out = np.zeros((q_u, n * p))
        for i, blk in self.k.items():
            out[:, (i - 1) * n:i * n] = blk
        return out

    def l_blockdiag(self, output_dims) -> np.ndarray:
        n = next(iter(self.l.values())).shape[0]
        p = len(output_dims)
        out = np.zeros((n * p, sum(output_dims)))
        col = 0
        for i in range(1, p + 1):
            q = output_dims[i - 1]
            out[(i - 1) * n:i * n, col:col + q] = self.l[i]
            col += q
        return out

    def g_matrix(self, p: int, n: int) -> np.ndarray:
        """Laplacian-like consensus block matrix: diagonal block i is
        sum_j g_bar_ij, off-diagonal block (i, j) is -g_bar_ij."""
        out = np.zeros((n * p, n * p))
        for (i, j), blk in self.g_bar.items():
            ii = slice((i - 1) * n, i * n)
            jj = slice((j - 1) * n, j * n)
            out[ii, ii] += blk
            out[ii, jj] -= blk
        return out


def zero_gains(net: SensorNetwork, q_u: int) -> GainSet:
    n = net.n_slow
    return GainSet(
        k={i: np.zeros((q_u, n)) for i in sorted(net.controller_nodes)},
        l={i + 1: np.zeros((n, net.output_dims[i])) for i in range(net.node_count)},
        g_bar={e: np.zeros((n, n)) for e in net.edges},
    )


@dataclass(frozen=True)
class PerformanceWeights:
    """State/input weights of the energy performance index and the horizon."""

    q: np.ndarray
    r: np.ndarray
    t_f: float = 4.0

    def __post_init__(self):
        q = 0.5 * (np.asarray(self.q, float) + np.asarray(self.q, float).T)
        r = 0.5 * (np.asarray(self.r, float) + np.asarray(self.r, float).T)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        for name, M in (("Q", q), ("R", r)):
            if M.size and np.linalg.eigvalsh(M)[0] < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")

    @property
    def d_r(self) -> np.ndarray:
        """Symmetric PSD factor with d_r.T @ d_r = R (elementwise sqrt when diagonal)."""
        w, V = np.linalg.eigh(self.r)
        w = np.clip(w, 0.0, None)
        return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class AugmentedSystem:
    """Closed-loop matrices over x_tilde = [x_s; e_1; ...; e_p]."""

    a_tilde: np.ndarray
    b_tilde: np.ndarray
    h1: np.ndarray          # selects x_s
    f_stack: np.ndarray     # stacks F_i with x_hat_i = F_i x_tilde
    k_bar: np.ndarray
    n: int
    p: int
    q_u: int
    q_w: int
    q_y_total: int

    @property
    def dim(self) -> int:
        return self.n * (self.p + 1)

    @property
    def ones_injector(self) -> np.ndarray:
        """Coefficient of the shared nonlinearity: 1_{p+1} (x) I_n."""
        return np.tile(np.eye(self.n), (self.p + 1, 1))


@dataclass(frozen=True)
class LyapunovCertificate:
    """Quadratic certificate (P > 0, tau > 0, rho > 0) with gamma = sqrt(rho)."""

    p_matrix: np.ndarray
    tau: float
    rho: float

    def __post_init__(self):
        P = 0.5 * (np.asarray(self.p_matrix, float)
                   + np.asarray(self.p_matrix, float).T)
        object.__setattr__(self, "p_matrix", P)

    @property
    def gamma(self) -> float:
        return math.sqrt(self.rho)

    def block(self, i: int, j: int, n: int) -> np.ndarray:
        """n x n partition block; indices 0..p with 0 the plant slot."""
        return self.p_matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]


def assemble_augmented(modal: ModalSystem, net: SensorNetwork,
                       gains: GainSet) -> AugmentedSystem:
    """Closed-loop system matrices for the slow plant plus the observer errors.

    The error block uses I_p (x) A_s so that the stacked error vector in
    R^{np} is propagated consistently.
    """
    gains.check_pattern(sparsity_pattern(net))
    n, p = modal.n_slow, net.node_count
    q_u, q_w = modal.q_u, modal.q_w
    a_s = np.diag(modal.a_slow)
    b_u, b_w = modal.b_u_slow, modal.b_w_slow

    k_bar = gains.k_stack(p, q_u, n)
    a_err = (np.kron(np.eye(p), a_s)
             - gains.l_blockdiag(net.output_dims) @ net.c_slow_blockdiag()
             + gains.g_matrix(p, n))

    dim = n * (p + 1)
    a_tilde = np.zeros((dim, dim))
    a_tilde[:n, :n] = a_s + b_u @ gains.k_sum(q_u, n)
    a_tilde[:n, n:] = -b_u @ k_bar
    a_tilde[n:, n:] = a_err

    q_y = net.total_outputs
    b_tilde = np.zeros((dim, q_w + q_y))
    b_tilde[:n, :q_w] = b_w
    b_tilde[n:, :q_w] = np.tile(b_w, (p, 1))
    b_tilde[n:, q_w:] = -gains.l_blockdiag(net.output_dims)

    h1 = np.zeros((n, dim))
    h1[:, :n] = np.eye(n)
    f_stack = np.zeros((n * p, dim))
    for i in range(1, p + 1):
        f_stack[(i - 1) * n:i * n, :n] = np.eye(n)
        f_stack[(i - 1) * n:i * n, i * n:(i + 1) * n] = -np.eye(n)
    return AugmentedSystem(a_tilde=a_tilde, b_tilde=b_tilde, h1=h1,
                           f_stack=f_stack, k_bar=k_bar, n=n, p=p,
                           q_u=q_u, q_w=q_w, q_y_total=q_y)


def theorem_matrix(aug: AugmentedSystem, p_matrix: np.ndarray, tau: float,
                   rho: float, weights: PerformanceWeights,
                   kappa1: float) -> np.ndarray:
    """Certificate matrix whose negative definiteness proves the gain bound.

    Blocks run over (x_tilde, shared nonlinearity, stacked disturbance);
    the weighted-input penalty enters the leading block directly.
    """
    P = p_matrix
    dim, n = aug.dim, aug.n
    ones = aug.ones_injector
    kf = aug.k_bar @ aug.f_stack
    drkf = weights.d_r @ kf
    top = (P @ aug.a_tilde + aug.a_tilde.T @ P
           + tau * kappa1**2 * (aug.h1.T @ aug.h1)
           + aug.h1.T @ weights.q @ aug.h1
           + drkf.T @ drkf)
    q_wy = aug.q_w + aug.q_y_total
    out = np.zeros((dim + n + q_wy, dim + n + q_wy))
    out[:dim, :dim] = top
    out[:dim, dim:dim + n] = P @ ones
    out[dim:dim + n, :dim] = ones.T @ P
    out[dim:dim + n, dim:dim + n] = -tau * np.eye(n)
    out[:dim, dim + n:] = P @ aug.b_tilde
    out[dim + n:, :dim] = aug.b_tilde.T @ P
    out[dim + n:, dim + n:] = -rho * np.eye(q_wy)
    return out


def bmi_matrix(aug: AugmentedSystem, p_matrix: np.ndarray, tau: float,
               rho: float, weights: PerformanceWeights,
               kappa1: float) -> np.ndarray:
    """Synthesis form of the certificate condition with the input penalty
    split off through a Schur complement: eliminating the final block row
    and column reproduces theorem_matrix exactly.

    Bilinear in (P) x (gains); affine in (P, tau, rho) for fixed gains and
    affine in (gains, tau, rho) for fixed P.
    """
    P = p_matrix
    dim, n, q_u = aug.dim, aug.n, aug.q_u
    ones = aug.ones_injector
    drkf = weights.d_r @ (aug.k_bar @ aug.f_stack)
    top = (P @ aug.a_tilde + aug.a_tilde.T @ P
           + tau * kappa1**2 * (aug.h1.T @ aug.h1)
           + aug.h1.T @ weights.q @ aug.h1)
    q_wy = aug.q_w + aug.q_y_total
    size = dim + n + q_wy + q_u
    out = np.zeros((size, size))
    out[:dim, :dim] = top
    out[:dim, dim:dim + n] = P @ ones
    out[dim:dim + n, :dim] = ones.T @ P
    out[dim:dim + n, dim:dim + n] = -tau * np.eye(n)
    out[:dim, dim + n:dim + n + q_wy] = P @ aug.b_tilde
    out[dim + n:dim + n + q_wy, :dim] = aug.b_tilde.T @ P
    out[dim + n:dim + n + q_wy, dim + n:dim + n + q_wy] = -rho * np.eye(q_wy)
    out[dim + n + q_wy:, :dim] = drkf
    out[:dim, dim + n + q_wy:] = drkf.T
    out[dim + n + q_wy:, dim + n + q_wy:] = -np.eye(q_u)
    return out


def seed_matrix(aug: AugmentedSystem, p_matrix: np.ndarray, tau: float,
                rho: float, beta: float, weights: PerformanceWeights,
                kappa1: float) -> np.ndarray:
    """Feasibility-relaxed synthesis matrix: beta * P is subtracted from the
    leading block, so beta <= 0 at a solution certifies the unrelaxed form."""
    out = bmi_matrix(aug, p_matrix, tau, rho, weights, kappa1)
    out[:aug.dim, :aug.dim] -= beta * p_matrix
    return out


def eliminate_input_block(xi: np.ndarray, q_u: int) -> np.ndarray:
    """Numeric Schur elimination of the trailing input block of the
    synthesis matrix; used to cross-check against theorem_matrix."""
    a = xi[:-q_u, :-q_u]
    b = xi[-q_u:, :-q_u]
    d = xi[-q_u:, -q_u:]
    return a - b.T @ np.linalg.solve(d, b)


# ---------------------------------------------------------------------------
# variable layouts
# ---------------------------------------------------------------------------

class GainLayout:
    """Flat indexing of (gain blocks, tau, objective scalar)."""

    def __init__(self, net: SensorNetwork, q_u: int):
        self.net = net
        self.q_u = q_u
        n = net.n_slow
        self.entries = []
        for i in sorted(net.controller_nodes):
            self.entries.append(("K", i, (q_u, n)))
        for i in range(1, net.node_count + 1):
            self.entries.append(("L", i, (n, net.output_dims[i - 1])))
        for e in net.edges:
            self.entries.append(("G", e, (n, n)))
        self.block_size = sum(r * c for _, _, (r, c) in self.entries)
        self.tau_index = self.block_size
        self.scalar_index = self.block_size + 1
        self.size = self.block_size + 2

    def pack(self, gains: GainSet, tau: float, scalar: float) -> np.ndarray:
        theta = np.zeros(self.size)
        pos = 0
        for kind, key, (r, c) in self.entries:
            blk = {"K": gains.k, "L": gains.l, "G": gains.g_bar}[kind][key]
            theta[pos:pos + r * c] = np.asarray(blk, float).ravel()
            pos += r * c
        theta[self.tau_index] = tau
        theta[self.scalar_index] = scalar
        return theta

    def unpack(self, theta: np.ndarray) -> tuple[GainSet, float, float]:
        k, l, g = {}, {}, {}
        pos = 0
        for kind, key, (r, c) in self.entries:
            blk = np.array(theta[pos:pos + r * c], float).reshape(r, c)
            pos += r * c
            {"K": k, "L": l, "G": g}[kind][key] = blk
        return (GainSet(k=k, l=l, g_bar=g),
                float(theta[self.tau_index]), float(theta[self.scalar_index]))


class PLayout:
    """Flat indexing of the lower triangle of P (structural symmetry)
    plus an optional trailing objective scalar."""

    def __init__(self, dim: int, with_scalar: bool):
        self.dim = dim
        self.rows, self.cols = np.tril_indices(dim)
        self.tri_size = self.rows.size
        self.with_scalar = with_scalar
        self.size = self.tri_size + (1 if with_scalar else 0)

    def pack(self, p_matrix: np.ndarray, scalar: float | None = None) -> np.ndarray:
        theta = np.zeros(self.size)
        theta[:self.tri_size] = p_matrix[self.rows, self.cols]
        if self.with_scalar:
            theta[self.tri_size] = scalar
        return theta

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, float | None]:
        P = np.zeros((self.dim, self.dim))
        P[self.rows, self.cols] = theta[:self.tri_size]
        P = P + np.tril(P, -1).T
        scalar = float(theta[self.tri_size]) if self.with_scalar else None
        return P, scalar


def affine_constraint(evaluator, m: int, sense: str = lmi.NEGATIVE,
                      margin: float | None = None,
                      name: str = "") -> lmi.AffineMatrixConstraint:
    """Extract the affine representation of a matrix-valued map by evaluation.

    The map must be affine in theta (unit-vector probing is then exact up to
    roundoff); bilinear certificate forms qualify once one variable group is
    frozen.
    """
    zero = np.zeros(m)
    F0 = evaluator(zero)
    coeffs = np.empty((m, F0.shape[0], F0.shape[1]))
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        coeffs[i] = evaluator(e) - F0
    return lmi.AffineMatrixConstraint(F0, coeffs, sense=sense, margin=margin,
                                      name=name)


# ---------------------------------------------------------------------------
# alternating synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlgorithmParams:
    """Knobs of the alternating synthesis loop and its embedded solver."""

    rho0: float = 900.0
    xi: float = 900.0
    delta_rho: float = 0.01
    beta_tol: float = 1e-9
    seed_cap: int = 50
    rho_cap: int = 200
    gain_bound: float = 1e4
    tau_min: float = 1e-6
    tau_max: float = 1e6
    beta_bound: float = 1e7
    p_bound: float = 1e5
    rho_floor: float = 1e-9
    gap_tol: float = 1e-5
    margin: float | None = None   # None: per-constraint default scaling


@dataclass
class IterationRecord:
    stage: str
    value: float


@dataclass
class DesignResult:
    gains: GainSet
    certificate: LyapunovCertificate
    gamma: float
    rho_log: list[float]
    history: list[IterationRecord]
    kappa1: float
    def summary(self) -> str:
        stages = ", ".join(f"{r.stage}={r.value:.4g}" for r in self.history)
        return (f"gamma = {self.gamma:.4f} (rho = {self.certificate.rho:.4f}, "
                f"tau = {self.certificate.tau:.4f}); steps: {stages}")


def _gain_bounds(layout: GainLayout, params: AlgorithmParams,
                 scalar_lo: float, scalar_hi: float):
    lower = np.full(layout.size, -params.gain_bound)
    upper = np.full(layout.size, params.gain_bound)
    lower[layout.tau_index] = params.tau_min
    upper[layout.tau_index] = params.tau_max
    lower[layout.scalar_index] = scalar_lo
    upper[layout.scalar_index] = scalar_hi
    return lower, upper


def _p_bounds(layout: PLayout, params: AlgorithmParams,
              scalar_lo: float | None = None, scalar_hi: float | None = None):
    lower = np.full(layout.size, -params.p_bound)
    upper = np.full(layout.size, params.p_bound)
    if layout.with_scalar:
        lower[layout.tri_size] = scalar_lo
        upper[layout.tri_size] = scalar_hi
    return lower, upper


def _solve_gain_group(modal, net, weights, kappa1, p_matrix, params,
                      mode: str, rho_fixed: float | None = None,
                      warm: np.ndarray | None = None):
    """OP over (gains, tau, scalar) with P frozen.

    mode 'seed': scalar is beta, rho held at rho_fixed, constraint is the
    relaxed matrix.  mode 'rho': scalar is rho, constraint is the synthesis
    matrix itself.
    """
    layout = GainLayout(net, modal.q_u)

    def evaluator(theta):
        gains, tau, scalar = layout.unpack(theta)
        aug = assemble_augmented(modal, net, gains)
        if mode == "seed":
            return seed_matrix(aug, p_matrix, tau, rho_fixed, scalar,
                               weights, kappa1)
        return bmi_matrix(aug, p_matrix, tau, scalar, weights, kappa1)

    con = affine_constraint(evaluator, layout.size, sense=lmi.NEGATIVE,
                            margin=params.margin, name=f"synthesis[{mode}]")
    if mode == "seed":
        lower, upper = _gain_bounds(layout, params,
                                    -params.beta_bound, params.beta_bound)
    else:
        lower, upper = _gain_bounds(layout, params,
                                    params.rho_floor, 10.0 * params.rho0)
    c = np.zeros(layout.size)
    c[layout.scalar_index] = 1.0
    problem = lmi.SdpProblem(c, [con], lower=lower, upper=upper)
    result = lmi.solve(problem, theta0=warm, gap_tol=params.gap_tol)
    gains, tau, scalar = layout.unpack(result.theta)
    return gains, tau, scalar, layout.pack(gains, tau, scalar)


def _p_problem(modal, net, weights, kappa1, gains, tau, params,
               beta: float | None, rho_fixed: float | None):
    """SDP data for the P group: synthesis constraint plus P > 0.

    With beta given the scalar is absent (feasibility at that beta); with
    beta None the trailing scalar is rho and is minimized.
    """
    aug = assemble_augmented(modal, net, gains)
    with_scalar = beta is None
    layout = PLayout(aug.dim, with_scalar=with_scalar)

    def evaluator(theta):
        P, scalar = layout.unpack(theta)
        if beta is not None:
            return seed_matrix(aug, P, tau, rho_fixed, beta, weights, kappa1)
        return bmi_matrix(aug, P, tau, scalar, weights, kappa1)

    con = affine_constraint(evaluator, layout.size, sense=lmi.NEGATIVE,
                            margin=params.margin, name="synthesis[P]")

    def p_eval(theta):
        P, _ = layout.unpack(theta)
        return P

    pos = affine_constraint(p_eval, layout.size, sense=lmi.POSITIVE,
                            margin=params.margin, name="P>0")
    if with_scalar:
        lower, upper = _p_bounds(layout, params, params.rho_floor,
                                 10.0 * params.rho0)
    else:
        lower, upper = _p_bounds(layout, params)
    c = np.zeros(layout.size)
    if with_scalar:
        c[layout.tri_size] = 1.0
    return layout, lmi.SdpProblem(c, [con, pos], lower=lower, upper=upper)


def _seed_p_step(modal, net, weights, kappa1, gains, tau, beta_hi, params):
    """OP over P at fixed gains: push beta down over feasibility checks.

    beta multiplies the free P, so for fixed beta the problem is affine in
    P, and feasibility is monotone in beta.  A coarse descending probe
    grid replaces an exact line search: the goal of this stage is reaching
    beta <= 0, not the exact minimizer.  Returns the accepted beta and a
    deep-interior P for it.
    """
    def feasible(beta):
        _, problem = _p_problem(modal, net, weights, kappa1, gains, tau,
                                params, beta=beta, rho_fixed=params.rho0)
        try:
            s, theta, _ = lmi.find_feasible(problem, target=-1e-7)
        except lmi.NumericalError:
            return False, None
        return (s < 0.0), theta

    hi = beta_hi
    ok, theta_hi = feasible(hi)
    bumps = 0
    while not ok and bumps < 6:
        hi = hi + max(1.0, abs(hi)) * 10.0**(bumps - 3)
        ok, theta_hi = feasible(hi)
        bumps += 1
    if not ok:
        raise lmi.NumericalError("previous seed iterate no longer feasible")

    if hi > params.beta_tol:
        # Smallest feasible probe wins; checking in ascending order stops
        # at the first success (feasibility is monotone in beta).
        for beta in (params.beta_tol - 1.0, 0.25 * hi, 0.5 * hi, 0.75 * hi):
            okm, theta = feasible(beta)
            if okm:
                hi, theta_hi = beta, theta
                break
    layout, problem = _p_problem(modal, net, weights, kappa1, gains, tau,
                                 params, beta=hi, rho_fixed=params.rho0)
    try:
        s, theta_deep, _ = lmi.find_feasible(problem)
        if s >= 0.0:
            theta_deep = theta_hi
    except lmi.NumericalError:
        theta_deep = theta_hi
    P, _ = layout.unpack(theta_deep)
    return P, hi


def _rho_p_step(modal, net, weights, kappa1, gains, tau, params,
                warm: np.ndarray | None = None):
    layout, problem = _p_problem(modal, net, weights, kappa1, gains, tau,
                                 params, beta=None, rho_fixed=None)
    result = lmi.solve(problem, theta0=warm, gap_tol=params.gap_tol)
    P, rho = layout.unpack(result.theta)
    return P, float(rho), layout


def feasible_beta(modal, net, weights, kappa1, gains: GainSet, tau: float,
                  p_matrix: np.ndarray, rho: float) -> float:
    """Smallest beta making the relaxed synthesis matrix negative definite
    at the given point.

    The trailing blocks of the matrix are diagonal and negative, so a Schur
    complement reduces the condition to a generalized eigenvalue problem
    against P on the leading block.
    """
    from scipy.linalg import eigh as generalized_eigh

    aug = assemble_augmented(modal, net, gains)
    P = p_matrix
    ones = aug.ones_injector
    kf = aug.k_bar @ aug.f_stack
    top = (P @ aug.a_tilde + aug.a_tilde.T @ P
           + tau * kappa1**2 * (aug.h1.T @ aug.h1)
           + aug.h1.T @ weights.q @ aug.h1)
    pj = P @ ones
    pb = P @ aug.b_tilde
    schur = (top + (pj @ pj.T) / tau + (pb @ pb.T) / rho
             + kf.T @ weights.r @ kf)
    eigs = generalized_eigh(schur, P, eigvals_only=True)
    return float(eigs[-1])


@dataclass
class SeedResult:
    gains: GainSet
    tau: float
    p_matrix: np.ndarray
    beta: float
    history: list[IterationRecord]
    entry: str      # which rho-stage runs first: "P" after a gain step, "gains" after a P step


def seed_feasibility(modal: ModalSystem, net: SensorNetwork,
                     weights: PerformanceWeights, kappa1: float,
                     params: AlgorithmParams) -> SeedResult:
    """Alternate the relaxed problems until beta <= 0 yields a feasible start.

    Starts from P = xi * I.  Raises SeedFailure when the cap is reached
    with beta still positive (a different xi or rho0 is then the recourse).
    """
    dim = modal.n_slow * (net.node_count + 1)
    P = params.xi * np.eye(dim)
    history: list[IterationRecord] = []
    for k in range(params.seed_cap):
        gains, tau, beta, _ = _solve_gain_group(
            modal, net, weights, kappa1, P, params,
            mode="seed", rho_fixed=params.rho0)
        history.append(IterationRecord("relax-gains", beta))
        if beta <= params.beta_tol:
            return SeedResult(gains, tau, P, beta, history, entry="P")
        P, beta = _seed_p_step(modal, net, weights, kappa1, gains, tau,
                               beta, params)
        history.append(IterationRecord("relax-P", beta))
        if beta <= params.beta_tol:
            return SeedResult(gains, tau, P, beta, history, entry="gains")
    raise SeedFailure(
        f"feasibility relaxation stalled at beta = {history[-1].value:.4g} "
        f"after {len(history)} alternations")


def algorithm1(modal: ModalSystem, net: SensorNetwork,
               weights: PerformanceWeights, kappa1: float,
               params: AlgorithmParams | None = None) -> DesignResult:
    """Alternating minimization of rho over the two bilinear variable groups.

    After the feasibility phase, gain steps (P frozen) and certificate
    steps (gains frozen) alternate until successive rho values differ by
    less than delta_rho.  A step that fails to improve rho keeps the
    incumbent and terminates.  The rho log is non-increasing by
    construction.
    """
    params = params or AlgorithmParams()
    seed = seed_feasibility(modal, net, weights, kappa1, params)
    history = list(seed.history)
    gains, tau, P = seed.gains, seed.tau, seed.p_matrix
    rho = params.rho0
    rho_log = [rho]
    stage = seed.entry
    gain_layout = GainLayout(net, modal.q_u)
    for _ in range(params.rho_cap):
        try:
            if stage == "gains":
                warm = gain_layout.pack(gains, tau, min(rho * (1 + 1e-6) + 1e-9,
                                                        9.99 * params.rho0))
                new_gains, new_tau, new_rho, _ = _solve_gain_group(
                    modal, net, weights, kappa1, P, params, mode="rho",
                    warm=warm)
                label = "min-rho-gains"
                if new_rho <= rho:
                    gains, tau = new_gains, new_tau
            else:
                p_layout = PLayout(P.shape[0], with_scalar=True)
                warm = p_layout.pack(P, min(rho * (1 + 1e-6) + 1e-9,
                                            9.99 * params.rho0))
                new_P, new_rho, _ = _rho_p_step(modal, net, weights, kappa1,
                                                gains, tau, params, warm=warm)
                label = "min-rho-P"
                if new_rho <= rho:
                    P = new_P
        except lmi.SolverError:
            # A stage that cannot be solved reliably is treated as a
            # non-improving step: keep the incumbent and stop.
            new_rho = np.inf
            label = f"min-rho-{stage}-failed"
        improved = new_rho <= rho
        rho = min(rho, new_rho)
        history.append(IterationRecord(label, rho))
        rho_log.append(rho)
        if abs(rho_log[-1] - rho_log[-2]) < params.delta_rho or not improved:
            break
        stage = "P" if stage == "gains" else "gains"
    cert = LyapunovCertificate(p_matrix=P, tau=tau, rho=rho)
    return DesignResult(gains=gains, certificate=cert, gamma=cert.gamma,
                        rho_log=rho_log, history=history, kappa1=kappa1)


def replay_certificate(modal: ModalSystem, net: SensorNetwork,
                       gains: GainSet, tau: float,
                       weights: PerformanceWeights, kappa1: float,
                       params: AlgorithmParams | None = None,
                       ) -> LyapunovCertificate:
    """Given fixed gains and tau, minimize rho over the certificate alone."""
    params = params or AlgorithmParams()
    P, rho, _ = _rho_p_step(modal, net, weights, kappa1, gains, tau, params)
    return LyapunovCertificate(p_matrix=P, tau=tau, rho=rho)


@dataclass(frozen=True)
class CertificateReport:
    lambda_max: float
    p_lambda_min: float
    sparsity_ok: bool
    tau: float
    rho: float
    gamma: float

    @property
    def passed(self) -> bool:
        return (self.lambda_max < 0.0 and self.p_lambda_min > 0.0
                and self.sparsity_ok and self.tau > 0.0 and self.rho > 0.0)


def verify_certificate(modal: ModalSystem, net: SensorNetwork,
                       gains: GainSet, cert: LyapunovCertificate,
                       weights: PerformanceWeights,
                       kappa1: float) -> CertificateReport:
    """Independent re-assembly and definiteness check of a proposed design."""
    sparsity_ok = gains.in_pattern(sparsity_pattern(net))
    lam_max = np.inf
    if sparsity_ok:
        aug = assemble_augmented(modal, net, gains)
        M = theorem_matrix(aug, cert.p_matrix, cert.tau, cert.rho,
                           weights, kappa1)
        _, lam_max = lmi.check_definiteness(M, lmi.NEGATIVE)
    _, p_min = lmi.check_definiteness(cert.p_matrix, lmi.POSITIVE)
    return CertificateReport(lambda_max=float(lam_max), p_lambda_min=float(p_min),
                             sparsity_ok=sparsity_ok, tau=cert.tau,
                             rho=cert.rho, gamma=cert.gamma)
