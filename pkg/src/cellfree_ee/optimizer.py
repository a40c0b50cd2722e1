"""Energy-efficiency maximization by alternating optimization.

For fixed powers the optimal receiver filters solve a generalized eigenvalue
problem whose numerator is rank one, so each filter is a preconditioned
matched filter B_k^{-1} gamma_k.  For fixed filters the power allocation is a
signomial problem handled by successive convex approximation: each round
replaces the product objective prod(1 + t_k) by its best local monomial
underestimator and solves the resulting geometric program under a trust
region.  A one-dimensional search over the total-power fraction nu converts
the fractional energy-efficiency objective into a family of throughput
problems; the search floor nu_star comes from a power-minimization GP.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .gp import GpProblem, Monomial, Posynomial, solve_gp
from .network import NetworkStats, SystemParams
from .performance import (SolutionState, build_sinr_matrices, evaluate_solution,
                          spectral_efficiency)
from .quantizer import QuantizerSpec

POWER_FLOOR_FRACTION = 1e-8     # GP domain needs strictly positive powers
NU_FLOOR = 1e-6


class InfeasibleScenarioError(RuntimeError):
    """Spectral-efficiency targets unreachable within the power boxes."""

    def __init__(self, message, users=()):
        super().__init__(message)
        self.users = list(users)


@dataclass
class ScaState:
    """Outcome of one successive-convex-approximation run."""

    q: np.ndarray
    t: np.ndarray                 # achieved SINRs at q
    t_hat: np.ndarray             # final operating point
    delta: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)   # prod(1 + SINR_k) per accepted iterate
    status: str = "ok"


@dataclass
class NuSearchResult:
    nu_star: float
    grid: np.ndarray
    ee_values: np.ndarray
    best_nu: float
    best_state: SolutionState
    states: list
    outer_iterations: list


def se_to_sinr_threshold(s_req, tau_p: int, tau_c: int):
    """SINR needed to meet an SE requirement under the pilot-overhead prelog."""
    return 2.0 ** (np.asarray(s_req, float) / (1.0 - tau_p / tau_c)) - 1.0


def design_filters(q: np.ndarray, stats: NetworkStats, spec: QuantizerSpec,
                   params: SystemParams) -> np.ndarray:
    """Receiver filters maximizing each user's SINR for fixed powers.

    The numerator of the SINR quadratic-form ratio is rank one, so the top
    generalized eigenvector of the matrix pair is B_k^{-1} gamma_k; B_k is
    diagonal plus a low-rank pilot-contamination part and is factorized
    densely at size M.  Columns are unit norm, oriented along gamma_k.
    """
    M, K, N = params.M, params.K, params.N
    q = np.asarray(q, float)
    U = np.empty((M, K))
    for k in range(K):
        mats = build_sinr_matrices(stats, spec, k)
        weights = N ** 2 * q * mats.pilot_row
        weights[k] = 0.0
        B = np.diag(N * (mats.d @ q) + (N / params.rho) * mats.r)
        active = weights > 0
        if np.any(active):
            V = mats.delta[:, active] * np.sqrt(weights[active])
            B += V @ V.T
        try:
            u = cho_solve(cho_factor(B), mats.gamma_k)
        except np.linalg.LinAlgError:
            eps = 1e-12 * np.trace(B) / M
            u = cho_solve(cho_factor(B + eps * np.eye(M)), mats.gamma_k)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            u = np.ones(M)
            norm = np.sqrt(M)
        u = u / norm
        if np.dot(u, mats.gamma_k) < 0:
            u = -u
        U[:, k] = u
    return U


def sinr_coefficients(U: np.ndarray, stats: NetworkStats, spec: QuantizerSpec,
                      params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Reduce the SINR to SINR_k(q) = q_k / ((A @ q)[k] + c[k]) for fixed filters.

    A[k, k'] collects the pilot-contamination and diagonal interference
    coefficients (the k' == k entry holds only the diagonal part); c[k] is the
    noise plus estimate-quantization term.  All entries are nonnegative, which
    is what makes the SINR constraints posynomial in q.
    """
    K = params.K
    A = np.empty((K, K))
    c = np.empty(K)
    for k in range(K):
        mats = build_sinr_matrices(stats, spec, k)
        u = U[:, k]
        u_sq = u ** 2
        ds = np.dot(u, mats.gamma_k) ** 2
        if ds <= 0:
            raise ValueError(f"filter for user {k} is orthogonal to its channel statistics")
        contam = mats.pilot_row * np.square(u @ mats.delta) / ds
        contam[k] = 0.0
        diag_part = (u_sq @ mats.d) / (params.N * ds)
        A[k] = contam + diag_part
        A[k, k] = diag_part[k]
        c[k] = np.dot(u_sq, mats.r) / (params.rho * params.N * ds)
    return A, c


def closed_form_sinr(q: np.ndarray, A: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.asarray(q, float) / (A @ q + c)


def _power_floor(p_max: np.ndarray) -> np.ndarray:
    return POWER_FLOOR_FRACTION * p_max


def _sinr_constraint(k: int, K: int, A: np.ndarray, c: np.ndarray,
                     factor_coeff: float, factor_var: int | None) -> Posynomial:
    """Posynomial for factor * q_k^{-1} ((A q)[k] + c_k) <= 1.

    ``factor_var`` indexes an extra variable multiplying every term (the SINR
    slack t_k); ``factor_coeff`` scales every term (an SE threshold).
    """
    terms = []

    def mono(coeff, exps):
        if factor_var is not None:
            exps = dict(exps)
            exps[factor_var] = exps.get(factor_var, 0.0) + 1.0
        return Monomial(coeff * factor_coeff, exps)

    for kp in range(K):
        if kp == k:
            if A[k, k] > 0:
                terms.append(mono(A[k, k], {}))
        elif A[k, kp] > 0:
            terms.append(mono(A[k, kp], {kp: 1.0, k: -1.0}))
    terms.append(mono(c[k], {k: -1.0}))
    return Posynomial(tuple(terms))


def solve_pmp(U: np.ndarray, stats: NetworkStats, spec: QuantizerSpec,
              params: SystemParams, tol: float = 1e-6) -> np.ndarray:
    """Minimal total power meeting every SE target at fixed filters.

    Returns the zero allocation when no user has a positive target.  Raises
    InfeasibleScenarioError naming the users whose targets cannot be met at
    full power.
    """
    K = params.K
    thresholds = se_to_sinr_threshold(params.s_req, params.tau_p, params.tau_c)
    if np.all(thresholds <= 0):
        return np.zeros(K)

    A, c = sinr_coefficients(U, stats, spec, params)
    constraints = [_sinr_constraint(k, K, A, c, float(thresholds[k]), None)
                   for k in range(K) if thresholds[k] > 0]
    objective = Posynomial(tuple(Monomial(1.0, {k: 1.0}) for k in range(K)))
    problem = GpProblem(n_vars=K, objective=objective, inequalities=constraints,
                        lower=_power_floor(params.p_max), upper=params.p_max)
    result = solve_gp(problem, tol=tol)
    if result.status != "optimal":
        full = closed_form_sinr(params.p_max, A, c)
        violating = [k for k in range(K) if full[k] < thresholds[k]]
        raise InfeasibleScenarioError(
            f"power minimization {result.status}: SE targets unreachable "
            f"(violating users at full power: {violating})", users=violating)
    return result.x


def compute_nu_star(q_plus: np.ndarray, p_max: np.ndarray) -> float:
    """Feasibility floor of the power-budget fraction: sum(q+) / sum(p_max)."""
    nu = float(np.sum(q_plus) / np.sum(p_max))
    return float(np.clip(nu, NU_FLOOR, 1.0))


def sca_power_allocation(U: np.ndarray, nu: float, q_init: np.ndarray,
                         params: SystemParams, stats: NetworkStats,
                         spec: QuantizerSpec, delta: float = 0.1,
                         step_tol: float = 0.01, max_iter: int = 30,
                         gp_tol: float = 1e-6) -> ScaState:
    """Power allocation maximizing prod(1 + SINR_k) within the nu budget.

    Each round solves the geometric program obtained by replacing every
    1 + t_k with its best local monomial approximation around the current
    operating point and constraining t to a multiplicative trust region.
    Stops when every slack moves by at most ``step_tol``.
    """
    K = params.K
    A, c = sinr_coefficients(U, stats, spec, params)
    thresholds = se_to_sinr_threshold(params.s_req, params.tau_p, params.tau_c)
    budget = nu * float(np.sum(params.p_max))
    floor = _power_floor(params.p_max)

    q = np.clip(np.asarray(q_init, float), floor, params.p_max)
    t_hat = np.maximum(closed_form_sinr(q, A, c), 1e-12)
    t_prev = t_hat.copy()

    se_constraints = [_sinr_constraint(k, K, A, c, float(thresholds[k]), None)
                      for k in range(K) if thresholds[k] > 0]
    budget_constraint = Posynomial(tuple(Monomial(1.0 / budget, {k: 1.0})
                                         for k in range(K)))

    trace = [float(np.prod(1.0 + t_hat))]
    best_q, best_obj = q.copy(), trace[0]
    converged = False
    status = "ok"

    for iteration in range(1, max_iter + 1):
        exponents = t_hat / (1.0 + t_hat)
        objective = Posynomial.of(Monomial(1.0, {K + k: -float(exponents[k])
                                                 for k in range(K)}))
        sinr_cons = [_sinr_constraint(k, K, A, c, 1.0, K + k) for k in range(K)]
        lower = np.concatenate([floor, (1.0 - delta) * t_hat])
        upper = np.concatenate([params.p_max, (1.0 + delta) * t_hat])
        problem = GpProblem(n_vars=2 * K, objective=objective,
                            inequalities=sinr_cons + se_constraints + [budget_constraint],
                            lower=lower, upper=upper)
        # warm start just inside the trust region; phase I finishes in a few steps
        warm = np.concatenate([q, (1.0 - 0.5 * delta) * t_hat])
        result = solve_gp(problem, tol=gp_tol, x0=warm)
        if result.status != "optimal":
            if iteration == 1:
                raise InfeasibleScenarioError(
                    f"power-allocation GP {result.status} at the initial point")
            status = f"gp_{result.status}"
            break

        q = result.x[:K]
        t = result.x[K:]
        achieved = np.maximum(closed_form_sinr(q, A, c), 1e-12)
        obj = float(np.prod(1.0 + achieved))
        trace.append(obj)
        if obj > best_obj:
            best_obj, best_q = obj, q.copy()

        step = float(np.max(np.abs(t - t_prev)))
        t_prev = t
        t_hat = achieved
        if step <= step_tol:
            converged = True
            break

    if not converged and status == "ok":
        status = "iteration_cap"
    if not converged:
        q = best_q
    achieved = closed_form_sinr(q, A, c)
    return ScaState(q=q, t=achieved, t_hat=t_hat, delta=delta,
                    iterations=len(trace) - 1, converged=converged,
                    objective_trace=trace, status=status)


def _seed_from_pmp(q_plus: np.ndarray, nu: float, params: SystemParams) -> np.ndarray:
    """Scale the minimum-power point up to fill the nu budget proportionally."""
    budget = nu * float(np.sum(params.p_max))
    total = float(np.sum(q_plus))
    if total <= 0:
        return np.minimum(nu * params.p_max, params.p_max)
    if total > budget * (1 + 1e-9):
        raise InfeasibleScenarioError(
            f"budget fraction nu={nu:.4g} lies below the feasibility floor")
    return np.minimum(q_plus * (budget / total), params.p_max)


@dataclass
class Algorithm1Result:
    state: SolutionState
    ee_trace: list
    surrogate_trace: list         # prod(1 + SINR) after each outer iteration
    outer_iterations: int
    sca_iterations: int
    converged: bool


def algorithm1(nu: float, params: SystemParams, stats: NetworkStats,
               spec: QuantizerSpec, q_plus: np.ndarray | None = None,
               q0: np.ndarray | None = None, max_outer: int = 50,
               outer_tol: float = 1e-3, per_user_tol: float = 0.01,
               sca_kwargs: dict | None = None) -> Algorithm1Result:
    """Alternate power allocation and filter design at a fixed budget fraction.

    Inner power allocation runs to its own 0.01 slack tolerance; the outer
    loop stops once per-user SINRs move by at most ``per_user_tol`` under a
    filter update and the energy efficiency changes by less than ``outer_tol``
    relative, or after ``max_outer`` rounds.  ``q0`` overrides the default
    seeding (the minimum-power point scaled up to fill the budget).
    """
    sca_kwargs = sca_kwargs or {}
    if q_plus is None:
        U_seed = design_filters(params.p_max, stats, spec, params)
        q_plus = solve_pmp(U_seed, stats, spec, params)
    q = _seed_from_pmp(q_plus, nu, params) if q0 is None else np.asarray(q0, float)
    U = design_filters(q, stats, spec, params)

    ee_trace: list[float] = []
    surrogate_trace: list[float] = []
    sca_total = 0
    converged = False

    for outer in range(1, max_outer + 1):
        try:
            sca = sca_power_allocation(U, nu, q, params, stats, spec, **sca_kwargs)
        except InfeasibleScenarioError:
            if outer == 1 and np.sum(q_plus) > 0:
                # retry from the raw minimum-power point with filters designed there,
                # where the SE constraints are feasible by construction
                q = np.maximum(q_plus, _power_floor(params.p_max))
                U = design_filters(q, stats, spec, params)
                sca = sca_power_allocation(U, nu, q, params, stats, spec, **sca_kwargs)
            else:
                raise
        q = sca.q
        sca_total += sca.iterations

        U_new = design_filters(q, stats, spec, params)
        A, c = sinr_coefficients(U_new, stats, spec, params)
        sinr_new = closed_form_sinr(q, A, c)
        per_user_change = float(np.max(np.abs(sinr_new - sca.t)))

        state = evaluate_solution(q, U_new, params, stats, spec)
        ee_trace.append(state.ee)
        surrogate_trace.append(float(np.prod(1.0 + state.sinr)))
        U = U_new

        if len(ee_trace) >= 2:
            rel = abs(ee_trace[-1] - ee_trace[-2]) / max(abs(ee_trace[-2]), 1e-30)
            if per_user_change <= per_user_tol and rel < outer_tol:
                converged = True
                break

    return Algorithm1Result(state=state, ee_trace=ee_trace,
                            surrogate_trace=surrogate_trace,
                            outer_iterations=len(ee_trace),
                            sca_iterations=sca_total, converged=converged)


def equal_power_baseline(params: SystemParams, stats: NetworkStats,
                         spec: QuantizerSpec) -> SolutionState:
    """Full power everywhere with flat unit-norm filters."""
    U = np.full((params.M, params.K), 1.0 / np.sqrt(params.M))
    return evaluate_solution(params.p_max.copy(), U, params, stats, spec)


def maximize_ee(params: SystemParams, stats: NetworkStats, spec: QuantizerSpec,
                nu_points: int = 12, nu_floor: float = 1e-3,
                algorithm1_kwargs: dict | None = None) -> NuSearchResult:
    """One-dimensional search over the power-budget fraction.

    Runs the alternating optimizer on a logarithmic nu grid between the
    feasibility floor and one, evaluating the full energy-efficiency model at
    each point, and returns the argmax.
    """
    algorithm1_kwargs = algorithm1_kwargs or {}
    U_seed = design_filters(params.p_max, stats, spec, params)
    q_plus = solve_pmp(U_seed, stats, spec, params)
    nu_star = compute_nu_star(q_plus, params.p_max)

    lo = max(nu_star, nu_floor)
    grid = np.geomspace(lo, 1.0, nu_points) if lo < 1.0 else np.array([1.0])

    states = []
    outer_its = []
    ee_values = np.empty(len(grid))
    q_warm = None
    for i, nu in enumerate(grid):
        # ascending nu: the previous solution stays feasible at the larger budget
        res = algorithm1(float(nu), params, stats, spec, q_plus=q_plus, q0=q_warm,
                         **algorithm1_kwargs)
        states.append(res.state)
        outer_its.append(res.outer_iterations)
        ee_values[i] = res.state.ee
        q_warm = res.state.q

    best = int(np.argmax(ee_values))
    return NuSearchResult(nu_star=nu_star, grid=grid, ee_values=ee_values,
                          best_nu=float(grid[best]), best_state=states[best],
                          states=states, outer_iterations=outer_its)
