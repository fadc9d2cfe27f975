"""Dense small-scale semidefinite solver for affine matrix-inequality programs.

Problems are posed over a vector theta of scalar decision variables:

    minimize    c . theta
    subject to  F0_k + sum_i theta_i F_ik   definite (sense_k), strictly,
                lower <= theta <= upper.

Every constraint is normalized internally to S_k(theta) > 0 (positive
definite) with the strictness margin folded into the constant block.  The
solver is a log-det barrier path-following method with a phase-1 stage
that either produces a strictly feasible interior point or certifies
infeasibility.  All arithmetic is dense and deterministic: identical
inputs give identical results on one platform.

Intended problem sizes are tens of variables and matrix blocks up to a
few dozen rows; no sparsity is exploited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

NEGATIVE = "negative_definite"
POSITIVE = "positive_definite"

DEFAULT_DIM_CAP = 64
SYM_TOL = 1e-12


class SolverError(RuntimeError):
    """Base class for solver failures."""


class InfeasibleError(SolverError):
    """No strictly feasible point exists (within the phase-1 tolerance)."""

    def __init__(self, message: str, best_slack: float):
        super().__init__(message)
        self.best_slack = best_slack


class NumericalError(SolverError):
    """Ill-conditioning stopped progress before a conclusion was reached."""


def default_margin(f0: np.ndarray) -> float:
    """Default strictness margin, scaled by the constant block."""
    return 1e-8 * (1.0 + np.linalg.norm(f0, 2))


def _symmetrize(M: np.ndarray, tol: float, what: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    gap = np.max(np.abs(M - M.T)) if M.size else 0.0
    if gap > tol * (1.0 + np.max(np.abs(M)) if M.size else 1.0):
        raise ValueError(f"{what} is not symmetric (max asymmetry {gap:g})")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class AffineMatrixConstraint:
    """F0 + sum_i theta_i F_i required negative- or positive-definite.

    coeffs has shape (m, d, d); a variable the block does not touch simply
    has a zero coefficient matrix.
    """

    constant: np.ndarray
    coeffs: np.ndarray
    sense: str = NEGATIVE
    margin: float | None = None
    name: str = ""

    def __post_init__(self):
        F0 = _symmetrize(self.constant, SYM_TOL, f"constraint {self.name or '?'} constant")
        object.__setattr__(self, "constant", F0)
        C = np.asarray(self.coeffs, dtype=float)
        if C.ndim != 3 or C.shape[1] != F0.shape[0] or C.shape[2] != F0.shape[0]:
            raise ValueError("coeffs must have shape (m, d, d) matching the constant")
        C = 0.5 * (C + np.transpose(C, (0, 2, 1)))
        object.__setattr__(self, "coeffs", C)
        if self.sense not in (NEGATIVE, POSITIVE):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.margin is None:
            object.__setattr__(self, "margin", default_margin(F0))
        if F0.shape[0] > DEFAULT_DIM_CAP:
            raise ValueError(
                f"block dimension {F0.shape[0]} exceeds the small-problem cap "
                f"{DEFAULT_DIM_CAP}")

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        return self.constant + np.tensordot(theta, self.coeffs, axes=(0, 0))

    def slack_data(self) -> tuple[np.ndarray, np.ndarray]:
        """(S0, Scoeffs) with the constraint equivalent to S(theta) > 0."""
        sign = -1.0 if self.sense == NEGATIVE else 1.0
        S0 = sign * self.constant - self.margin * np.eye(self.dim)
        return S0, sign * self.coeffs


@dataclass
class SdpProblem:
    """Linear objective over affine matrix inequalities with box bounds."""

    objective: np.ndarray
    constraints: list[AffineMatrixConstraint]
    names: list[str] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        m = self.objective.size
        for con in self.constraints:
            if con.coeffs.shape[0] != m:
                raise ValueError(f"constraint {con.name or '?'} has wrong variable count")
        self.lower = (np.full(m, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float))
        self.upper = (np.full(m, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float))
        if self.lower.size != m or self.upper.size != m:
            raise ValueError("bound vectors must match the variable count")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")
        if not self.names:
            self.names = [f"x{i}" for i in range(m)]

    @property
    def num_variables(self) -> int:
        return self.objective.size

    def to_json(self) -> str:
        """Debug dump of the full problem data."""
        return json.dumps({
            "objective": self.objective.tolist(),
            "names": list(self.names),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "constraints": [{
                "name": c.name,
                "sense": c.sense,
                "margin": c.margin,
                "constant": c.constant.tolist(),
                "coeffs": c.coeffs.tolist(),
            } for c in self.constraints],
        })

    @staticmethod
    def from_json(text: str) -> "SdpProblem":
        data = json.loads(text)
        cons = [AffineMatrixConstraint(
            constant=np.array(c["constant"]),
            coeffs=np.array(c["coeffs"]),
            sense=c["sense"], margin=c["margin"], name=c.get("name", ""))
            for c in data["constraints"]]
        return SdpProblem(objective=np.array(data["objective"]), constraints=cons,
                          names=list(data["names"]),
                          lower=np.array(data["lower"]), upper=np.array(data["upper"]))


@dataclass(frozen=True)
class SdpResult:
    status: str
    theta: np.ndarray
    objective_value: float
    gap: float
    newton_steps: int


def check_definiteness(M: np.ndarray, sense: str = NEGATIVE,
                       tol: float = SYM_TOL) -> tuple[bool, float]:
    """Sign decision for a symmetric matrix plus its relevant extreme eigenvalue.

    Returns (is_definite_with_requested_sense, extreme_eigenvalue), where the
    extreme eigenvalue is lambda_max for the negative sense and lambda_min
    for the positive sense.  Asymmetry beyond tol raises.
    """
    M = _symmetrize(M, tol, "matrix")
    if M.size == 0:
        return True, 0.0
    eigs = np.linalg.eigvalsh(M)
    if sense == NEGATIVE:
        return bool(eigs[-1] < 0.0), float(eigs[-1])
    if sense == POSITIVE:
        return bool(eigs[0] > 0.0), float(eigs[0])
    raise ValueError(f"unknown sense {sense!r}")


# ---------------------------------------------------------------------------
# barrier engine
# ---------------------------------------------------------------------------

class _Barrier:
    """Log-det barrier for normalized blocks S_k(theta) > 0 plus box bounds."""

    def __init__(self, blocks, lower, upper):
        self.blocks = blocks                  # list of (S0, Scoeffs)
        self.lower = lower
        self.upper = upper
        self.fin_lo = np.isfinite(lower)
        self.fin_up = np.isfinite(upper)
        self.nu = sum(S0.shape[0] for S0, _ in blocks) \
            + int(np.sum(self.fin_lo)) + int(np.sum(self.fin_up))

    def chol_all(self, theta):
        """Cholesky factors of every block, or None if any fails strictly."""
        Ls = []
        if np.any(theta[self.fin_lo] <= self.lower[self.fin_lo]):
            return None
        if np.any(theta[self.fin_up] >= self.upper[self.fin_up]):
            return None
        for S0, C in self.blocks:
            S = S0 + np.tensordot(theta, C, axes=(0, 0))
            try:
                Ls.append(np.linalg.cholesky(S))
            except np.linalg.LinAlgError:
                return None
        return Ls

    def value(self, theta, Ls):
        val = 0.0
        for L in Ls:
            val -= 2.0 * np.sum(np.log(np.diag(L)))
        val -= np.sum(np.log(theta[self.fin_lo] - self.lower[self.fin_lo]))
        val -= np.sum(np.log(self.upper[self.fin_up] - theta[self.fin_up]))
        return val

    def grad_hess(self, theta, Ls):
        m = theta.size
        g = np.zeros(m)
        H = np.zeros((m, m))
        for (S0, C), L in zip(self.blocks, Ls):
            d = S0.shape[0]
            Linv = np.linalg.inv(L)
            # V_i = Linv C_i Linv^T is symmetric; grad_i = -tr(V_i),
            # H_ij = tr(V_i V_j) = vec(V_i) . vec(V_j).
            V = np.einsum("ab,ibc,dc->iad", Linv, C, Linv, optimize=True)
            g -= np.trace(V, axis1=1, axis2=2)
            Vf = V.reshape(m, d * d)
            H += Vf @ Vf.T
        dlo = theta[self.fin_lo] - self.lower[self.fin_lo]
        dup = self.upper[self.fin_up] - theta[self.fin_up]
        g[self.fin_lo] -= 1.0 / dlo
        g[self.fin_up] += 1.0 / dup
        diag = np.zeros(m)
        diag[self.fin_lo] += 1.0 / dlo**2
        diag[self.fin_up] += 1.0 / dup**2
        H[np.diag_indices(m)] += diag
        return g, H


def _newton_solve(H, rhs):
    """Solve H x = rhs for a barrier Hessian H (PSD up to roundoff).

    Jacobi scaling equalizes the wildly different curvatures of box-bound
    and matrix-barrier directions; the scaled system is then inverted
    through an eigendecomposition with a relative cutoff, so directions the
    barrier cannot resolve (near-collinear coefficient blocks) are frozen
    instead of being filled with amplified roundoff.
    """
    d = np.sqrt(np.maximum(np.diag(H), 0.0))
    floor = max(float(np.max(d)), 1.0) * 1e-150
    d = np.maximum(d, floor)
    Hs = H / d[:, None] / d[None, :]
    rs = rhs / d
    try:
        w, V = np.linalg.eigh(0.5 * (Hs + Hs.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Newton system eigendecomposition failed") from exc
    cutoff = max(float(w[-1]), 1.0) * 1e-13
    inv = np.where(w > cutoff, 1.0 / np.maximum(w, cutoff), 0.0)
    x = V @ (inv * (V.T @ rs))
    return x / d


def _center(barrier, theta, t, c, max_steps=500, lam_tol=1e-6, stop=None):
    """Newton minimization of t*c.theta + barrier(theta).

    Backtracks from a full Newton step for speed but never below the
    self-concordant damped step 1/(1+lambda), which is feasible and makes
    guaranteed progress; this keeps the far phase fast without losing the
    convergence guarantee.  Decrease tests difference t*alpha*(c.step)
    against the barrier change directly to stay meaningful at large t.
    """
    Ls = barrier.chol_all(theta)
    if Ls is None:
        raise NumericalError("centering started from an infeasible point")
    steps = 0
    converged = False
    for _ in range(max_steps):
        g, H = barrier.grad_hess(theta, Ls)
        g = t * c + g
        step = _newton_solve(H, -g)
        lam2 = max(float(-g @ step), 0.0)
        lam = np.sqrt(lam2)
        if lam <= lam_tol:
            converged = True
            break
        alpha_floor = 1.0 / (1.0 + lam)
        bar0 = barrier.value(theta, Ls)
        c_step = c @ step
        alpha, chosen = 1.0, None
        while alpha > alpha_floor:
            Lc = barrier.chol_all(theta + alpha * step)
            if Lc is not None:
                delta = t * alpha * c_step + (barrier.value(theta + alpha * step, Lc)
                                              - bar0)
                if delta <= -0.01 * alpha * lam2:
                    chosen = (alpha, Lc)
                    break
            alpha *= 0.5
        if chosen is None:
            alpha = alpha_floor
            Lc = None
            for _ in range(60):
                Lc = barrier.chol_all(theta + alpha * step)
                if Lc is not None:
                    break
                alpha *= 0.5
            if Lc is None:
                break
            chosen = (alpha, Lc)
        alpha, Ls = chosen
        theta = theta + alpha * step
        steps += 1
        if stop is not None and stop(theta):
            return theta, steps, True, converged
    return theta, steps, False, converged


def _initial_t(barrier, theta, c, fallback=1.0):
    """Barrier parameter making theta approximately centered: minimizes
    |t c + grad| in the Hessian norm.  Lets warm starts skip the cold
    path-following prefix."""
    Ls = barrier.chol_all(theta)
    if Ls is None:
        return fallback
    g, H = barrier.grad_hess(theta, Ls)
    x = _newton_solve(H, c)
    denom = float(c @ x)
    if denom <= 0.0:
        return fallback
    t = -float(x @ g) / denom
    if not np.isfinite(t) or t <= 0.0:
        return fallback
    # The cap forces at least a couple of outer iterations, so an off-center
    # warm start cannot masquerade as an already-converged path endpoint.
    return float(np.clip(t, 1.0, 1e6))


def _path_follow(barrier, c, theta, gap_tol, stop=None, t0=None, mu=20.0,
                 t_cap=1e14):
    """Outer barrier loop with stall recovery.

    A centering that fails to converge is retried from the last centered
    point with a gentler t schedule (or, before any center is reached, at a
    smaller t): ill-conditioned warm starts recover instead of returning a
    bogus optimum.
    """
    total_steps = 0
    t = _initial_t(barrier, theta, c) if t0 is None else t0
    mu_eff = mu
    recoveries = 0
    last_good = None
    while True:
        theta, steps, early, converged = _center(barrier, theta, t, c, stop=stop)
        total_steps += steps
        if early:
            return theta, barrier.nu / t, total_steps
        if converged:
            last_good = (theta.copy(), t)
            if barrier.nu / t <= gap_tol or t >= t_cap:
                return theta, barrier.nu / t, total_steps
            t = min(t * mu_eff, t_cap)
            continue
        recoveries += 1
        if recoveries > 8:
            if last_good is not None:
                # Conditioning blocks further progress; the last centered
                # point is still feasible and carries its honest gap.
                theta, t_good = last_good
                return theta, barrier.nu / t_good, total_steps
            raise NumericalError(f"centering stalled near t = {t:g}")
        if last_good is None:
            t = max(t / mu_eff, 1e-8)
        else:
            theta = last_good[0].copy()
            mu_eff = max(np.sqrt(mu_eff), 1.5)
            t = min(last_good[1] * mu_eff, t_cap)


def _initial_point(problem: SdpProblem) -> np.ndarray:
    lo, up = problem.lower, problem.upper
    theta = np.zeros(problem.num_variables)
    for i in range(theta.size):
        lo_i, up_i = lo[i], up[i]
        if np.isfinite(lo_i) and np.isfinite(up_i):
            if lo_i > 0.0 and up_i / lo_i > 100.0:
                # Wide positive range: the geometric mean is a far better
                # scale guess than the arithmetic midpoint.
                theta[i] = np.sqrt(lo_i * up_i)
            else:
                theta[i] = 0.5 * (lo_i + up_i)
        elif np.isfinite(lo_i):
            theta[i] = lo_i + 1.0
        elif np.isfinite(up_i):
            theta[i] = up_i - 1.0
    return theta


def find_feasible(problem: SdpProblem, target: float | str | None = None,
                  gap_tol: float = 1e-9) -> tuple[float, np.ndarray, int]:
    """Phase 1: minimize the uniform slack s with S_k(theta) + s I > 0.

    Returns (s, theta, newton_steps).  The point theta is strictly feasible
    for the original constraints iff s < 0.  When target is given the
    search stops as soon as s <= target; symmetrically, it stops as soon
    as the barrier's own gap bound certifies that s cannot reach the
    target (the minimum slack exceeds s - gap > max(target, 0)).  The
    string "auto" asks for a moderately interior point: target is set to
    -0.01x the initial infeasibility scale.
    """
    blocks = [con.slack_data() for con in problem.constraints]
    theta0 = _initial_point(problem)
    s0 = 1.0
    for S0, C in blocks:
        S = S0 + np.tensordot(theta0, C, axes=(0, 0))
        lam = np.linalg.eigvalsh(S)[0]
        s0 = max(s0, 1.0 - lam)
    m = problem.num_variables
    ext_blocks = []
    for S0, C in blocks:
        d = S0.shape[0]
        Ce = np.concatenate([C, np.eye(d)[None, :, :]], axis=0)
        ext_blocks.append((S0, Ce))
    lower = np.concatenate([problem.lower, [-np.inf]])
    upper = np.concatenate([problem.upper, [s0 + 1.0]])
    barrier = _Barrier(ext_blocks, lower, upper)
    c = np.zeros(m + 1)
    c[m] = 1.0
    theta_ext = np.concatenate([theta0, [s0]])
    if barrier.chol_all(theta_ext) is None:
        raise NumericalError("phase-1 start is not strictly feasible")
    scale = max(1.0, abs(s0))
    if target == "auto":
        target = -0.01 * scale
    stop = None
    if target is not None:
        stop = lambda th: th[m] <= target
    steps_total = 0
    t = 1.0
    floor = max(target, 0.0) if target is not None else None
    mu_eff = 20.0
    recoveries = 0
    last_good = None
    while True:
        theta_ext, steps, early, converged = _center(barrier, theta_ext, t, c,
                                                     stop=stop)
        steps_total += steps
        gap = barrier.nu / t
        if early:
            break
        if converged:
            last_good = (theta_ext.copy(), t)
            if gap <= gap_tol * scale or t >= 1e14:
                break
            if floor is not None and theta_ext[m] - gap > floor:
                # Certified: min slack >= s - gap > floor, no point refining.
                break
            t = min(t * mu_eff, 1e14)
            continue
        recoveries += 1
        if recoveries > 8:
            if theta_ext[m] >= 0.0:
                raise NumericalError(
                    "phase 1 stalled before reaching a feasibility verdict")
            break
        if last_good is None:
            t = max(t / mu_eff, 1e-8)
        else:
            theta_ext = last_good[0].copy()
            mu_eff = max(np.sqrt(mu_eff), 1.5)
            t = min(last_good[1] * mu_eff, 1e14)
    return float(theta_ext[m]), theta_ext[:m], steps_total


def is_strictly_feasible(problem: SdpProblem, theta: np.ndarray) -> bool:
    blocks = [con.slack_data() for con in problem.constraints]
    barrier = _Barrier(blocks, problem.lower, problem.upper)
    return barrier.chol_all(np.asarray(theta, dtype=float)) is not None


def solve(problem: SdpProblem, theta0: np.ndarray | None = None,
          gap_tol: float = 1e-9) -> SdpResult:
    """Minimize the linear objective over the strictly feasible region.

    theta0, when supplied and strictly feasible, skips phase 1.  Raises
    InfeasibleError when no strictly feasible point exists and
    NumericalError when conditioning halts progress.  The returned point is
    always strictly feasible (margins included), with the objective within
    roughly gap_tol * max(1, |c|) of the optimum.
    """
    m = problem.num_variables
    steps0 = 0
    if theta0 is not None and is_strictly_feasible(problem, np.asarray(theta0, float)):
        theta = np.asarray(theta0, dtype=float).copy()
    else:
        s, theta, steps0 = find_feasible(problem, target="auto", gap_tol=gap_tol)
        if s >= 0.0:
            raise InfeasibleError(
                f"no strictly feasible point (best uniform slack {s:g})", s)
    blocks = [con.slack_data() for con in problem.constraints]
    barrier = _Barrier(blocks, problem.lower, problem.upper)
    c = problem.objective
    if not np.any(c):
        # Pure feasibility: the phase-1 point (deep interior) is the answer.
        return SdpResult("optimal", theta, 0.0, 0.0, steps0)
    c_scale = np.max(np.abs(c))
    theta, gap, steps = _path_follow(barrier, c / c_scale, theta, gap_tol)
    value = float(c @ theta)
    status = "optimal" if gap <= 10.0 * gap_tol else "inaccurate"
    return SdpResult(status, theta, value, float(gap * c_scale), steps0 + steps)


def verify_solution(problem: SdpProblem, theta: np.ndarray,
                    slack: float = 1e-9) -> float:
    """Worst constraint violation of theta, replayed through check_definiteness.

    Returns the largest amount by which any extreme eigenvalue falls short
    of its margined target (negative means everything holds with room).
    """
    theta = np.asarray(theta, dtype=float)
    worst = -np.inf
    for con in problem.constraints:
        M = con.evaluate(theta)
        _, extreme = check_definiteness(M, con.sense)
        if con.sense == NEGATIVE:
            worst = max(worst, extreme + con.margin - slack)
        else:
            worst = max(worst, con.margin - slack - extreme)
    return worst
