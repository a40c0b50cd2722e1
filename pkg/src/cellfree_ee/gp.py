"""A small geometric-programming engine.

Posynomials over positive variables become log-sum-exp functions of y = log x.
Problems are solved by a logarithmic-barrier interior-point method with damped
Newton steps: a phase-I search first finds a strictly feasible point, then the
barrier parameter is increased geometrically until the duality gap closes.
Monomial equalities are affine in log space and eliminated exactly before the
solve.  A log-space grid oracle provides an independent reference optimum for
small problems.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.special import logsumexp


@dataclass(frozen=True)
class Monomial:
    """coeff * prod_i x_i^exponents[i] with coeff > 0."""

    coeff: float
    exponents: dict

    def __post_init__(self):
        if self.coeff <= 0:
            raise ValueError(f"monomial coefficient must be positive, got {self.coeff}")

    def value(self, x):
        x = np.asarray(x, float)
        out = self.coeff
        for i, e in self.exponents.items():
            out = out * x[i] ** e
        return out


@dataclass(frozen=True)
class Posynomial:
    """Sum of monomials; always at least one term."""

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ValueError("posynomial needs at least one term")

    @staticmethod
    def of(*terms) -> "Posynomial":
        return Posynomial(terms=tuple(terms))


def posynomial_eval(p: Posynomial, x) -> float:
    """Evaluate a posynomial at a positive point."""
    x = np.asarray(x, float)
    if np.any(x <= 0):
        raise ValueError("posynomials are defined on the positive orthant only")
    return float(sum(t.value(x) for t in p.terms))


@dataclass
class GpProblem:
    """minimize objective s.t. each inequality <= 1, each equality == 1, lower <= x <= upper."""

    n_vars: int
    objective: Posynomial
    inequalities: list = field(default_factory=list)
    equalities: list = field(default_factory=list)
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if self.lower is None:
            self.lower = np.full(self.n_vars, 1e-8)
        else:
            self.lower = np.broadcast_to(np.asarray(self.lower, float), (self.n_vars,)).copy()
        if self.upper is None:
            self.upper = np.full(self.n_vars, 1e8)
        else:
            self.upper = np.broadcast_to(np.asarray(self.upper, float), (self.n_vars,)).copy()
        if np.any(self.lower <= 0):
            raise ValueError("variable lower bounds must be positive (GP domain)")
        if np.any(self.upper <= self.lower):
            raise ValueError("variable upper bounds must exceed lower bounds")
        for p in [self.objective, *self.inequalities]:
            for t in p.terms:
                self._check_vars(t)
        for t in self.equalities:
            self._check_vars(t)

    def _check_vars(self, mono: Monomial):
        for i in mono.exponents:
            if not 0 <= i < self.n_vars:
                raise ValueError(f"variable index {i} out of range for {self.n_vars} variables")


@dataclass
class GpResult:
    x: np.ndarray
    objective: float
    status: str                  # optimal | infeasible | unbounded | max_iterations
    max_violation: float = np.nan
    iterations: int = 0
    objective_trace: list = field(default_factory=list)


def _compile(p: Posynomial, n: int):
    """Posynomial -> (A, b) with value(y) = logsumexp(A y + b)."""
    A = np.zeros((len(p.terms), n))
    b = np.zeros(len(p.terms))
    for j, t in enumerate(p.terms):
        b[j] = np.log(t.coeff)
        for i, e in t.exponents.items():
            A[j, i] = e
    return A, b


def _lse(A, b, y, grad=False, hess=False):
    z = A @ y + b
    zmax = np.max(z)
    e = np.exp(z - zmax)
    s = np.sum(e)
    val = zmax + np.log(s)
    if not grad:
        return val
    w = e / s
    g = A.T @ w
    if not hess:
        return val, g
    H = A.T @ (A * w[:, None]) - np.outer(g, g)
    return val, g, H


class _BarrierSolver:
    """Damped-Newton barrier method on: min lse0(y) s.t. lse_i(y) <= 0.

    Single-term constraints (box bounds and monomial inequalities) are affine
    in y and handled in one batched pass; only genuine multi-term posynomials
    pay for log-sum-exp derivatives.
    """

    def __init__(self, objective, constraints, tol, mu=10.0, max_newton=20000):
        self.obj = objective           # (A0, b0)
        self.tol = tol
        self.mu = mu
        self.max_newton = max_newton
        self.newton_count = 0
        self.n_cons = len(constraints)
        self.lse_cons = [(A, b) for A, b in constraints if A.shape[0] > 1]
        affine = [(A, b) for A, b in constraints if A.shape[0] == 1]
        if affine:
            self.aff_A = np.vstack([A for A, _ in affine])
            self.aff_b = np.concatenate([b for _, b in affine])
        else:
            self.aff_A = None
            self.aff_b = None

    def constraint_values(self, y):
        vals = [_lse(A, b, y) for A, b in self.lse_cons]
        if self.aff_A is not None:
            vals = np.concatenate([vals, self.aff_A @ y + self.aff_b])
        return np.asarray(vals)

    def _newton(self, t, y, stop_when=None):
        """Center t*f0 + barrier from strictly feasible y."""
        n = y.size
        for _ in range(200):
            if self.newton_count >= self.max_newton:
                return y, "global_cap"
            self.newton_count += 1
            f0, g0, H0 = _lse(*self.obj, y, grad=True, hess=True)
            g = t * g0
            H = t * H0
            domain_ok = True
            for A, b in self.lse_cons:
                fi, gi, Hi = _lse(A, b, y, grad=True, hess=True)
                if fi >= 0:
                    domain_ok = False
                    break
                g += gi / (-fi)
                H += np.outer(gi, gi) / fi ** 2 + Hi / (-fi)
            if self.aff_A is not None and domain_ok:
                fa = self.aff_A @ y + self.aff_b
                if np.any(fa >= 0):
                    domain_ok = False
                else:
                    g += self.aff_A.T @ (1.0 / -fa)
                    H += self.aff_A.T @ (self.aff_A / np.square(fa)[:, None])
            if not domain_ok:
                raise RuntimeError("barrier iterate left the feasible domain")
            try:
                step = -np.linalg.solve(H + 1e-12 * np.eye(n), g)
            except np.linalg.LinAlgError:
                step = -np.linalg.solve(H + 1e-8 * np.eye(n), g)
            lam_sq = float(-g @ step)
            if lam_sq / 2.0 <= 1e-10:
                return y, "centered"
            # backtracking line search, keeping strict feasibility
            alpha = 1.0
            fcur = t * f0 - np.sum(np.log(-self.constraint_values(y)))
            for _ in range(60):
                y_new = y + alpha * step
                fis = self.constraint_values(y_new)
                if np.all(fis < 0):
                    f_new = t * _lse(*self.obj, y_new) - np.sum(np.log(-fis))
                    if f_new <= fcur - 0.25 * alpha * lam_sq:
                        break
                alpha *= 0.5
            else:
                return y, "centered"    # no progress possible at float precision
            y = y_new
            if stop_when is not None and stop_when(y):
                return y, "early"
        return y, "capped"          # slow centering; caller proceeds along the path

    def minimize(self, y0, stop_when=None):
        """Barrier path from strictly feasible y0.  Returns (y, trace, status)."""
        m = self.n_cons
        y = y0
        t = 1.0
        t_final = m / self.tol      # gap m/t meets tol exactly at t_final
        trace = []
        while True:
            y, state = self._newton(t, y, stop_when)
            trace.append(float(_lse(*self.obj, y)))
            if state == "early":
                return y, trace, "optimal"
            if state == "global_cap":
                return y, trace, "max_iterations"
            if trace[-1] < -700.0:
                return y, trace, "unbounded"
            if m / t <= self.tol:
                return y, trace, "optimal"
            t = min(t * self.mu, t_final)


def _box_rows(lower, upper):
    """Box bounds as single-term log constraints."""
    rows = []
    n = lower.size
    for i in range(n):
        if np.isfinite(upper[i]):
            a = np.zeros(n)
            a[i] = 1.0
            rows.append((a[None, :], np.array([-np.log(upper[i])])))
        a = np.zeros(n)
        a[i] = -1.0
        rows.append((a[None, :], np.array([np.log(lower[i])])))
    return rows


def _eliminate_equalities(problem: GpProblem):
    """Affine elimination of monomial equalities in log space.

    Returns (y0, Z, ok): feasible particular solution and null-space basis with
    y = y0 + Z w, or ok=False when the equality system is inconsistent.
    """
    n = problem.n_vars
    if not problem.equalities:
        return np.zeros(n), np.eye(n), True
    E = np.zeros((len(problem.equalities), n))
    f = np.zeros(len(problem.equalities))
    for r, mono in enumerate(problem.equalities):
        f[r] = -np.log(mono.coeff)
        for i, e in mono.exponents.items():
            E[r, i] = e
    y0, *_ = np.linalg.lstsq(E, f, rcond=None)
    if not np.allclose(E @ y0, f, atol=1e-9):
        return None, None, False
    Z = null_space(E)
    return y0, Z, True


def solve_gp(problem: GpProblem, tol: float = 1e-6, x0=None) -> GpResult:
    """Solve a GP to relative tolerance ``tol`` via the log-barrier method.

    The returned status is one of optimal / infeasible / unbounded /
    max_iterations; on success the point is strictly feasible and the
    objective lies within ``tol`` of the optimum of the log-transformed
    convex problem.  ``x0`` optionally warm-starts the search (it need not be
    feasible; a near-feasible start mostly skips the phase-I search).
    """
    n = problem.n_vars
    obj = _compile(problem.objective, n)
    cons = [_compile(p, n) for p in problem.inequalities]
    cons += _box_rows(problem.lower, problem.upper)

    y0, Z, consistent = _eliminate_equalities(problem)
    if not consistent:
        return GpResult(x=np.full(n, np.nan), objective=np.nan, status="infeasible")

    def to_reduced(pair):
        A, b = pair
        return A @ Z, b + A @ y0

    obj_r = to_reduced(obj)
    cons_r = [to_reduced(c) for c in cons]
    n_red = Z.shape[1]

    def finish(y_red, status, iterations, trace):
        y = y0 + Z @ y_red
        x = np.exp(y)
        viol = max((posynomial_eval(p, x) - 1.0 for p in problem.inequalities), default=0.0)
        viol = max(viol, float(np.max(problem.lower / x - 1.0, initial=0.0)),
                   float(np.max(x / problem.upper - 1.0, initial=0.0)))
        return GpResult(x=x, objective=posynomial_eval(problem.objective, x),
                        status=status, max_violation=viol, iterations=iterations,
                        objective_trace=trace)

    if n_red == 0:
        # equalities pin the point entirely
        y_red = np.zeros(0)
        res = finish(y_red, "optimal", 0, [])
        if res.max_violation > tol:
            res.status = "infeasible"
        return res

    # start from the warm-start point or the log midpoint of the boxes
    if x0 is not None:
        lo_y = np.log(problem.lower)
        hi_y = np.log(np.where(np.isfinite(problem.upper), problem.upper,
                               problem.lower * 1e12))
        # keep a sliver of the box between the start and the barrier singularity
        pad = 1e-3 * (hi_y - lo_y)
        y_start = np.clip(np.log(np.maximum(np.asarray(x0, float), 1e-300)),
                          lo_y + pad, hi_y - pad)
    else:
        y_start = 0.5 * (np.log(problem.lower) + np.log(np.where(np.isfinite(problem.upper),
                                                                 problem.upper,
                                                                 problem.lower * 1e6)))
    w = np.linalg.lstsq(Z, y_start - y0, rcond=None)[0]

    ph1_iterations = 0
    slack = max(float(_lse(A, b, w)) for A, b in cons_r)
    if slack >= -1e-7:
        # phase I: minimize s subject to lse_i(w) - s <= 0
        def augment(pair):
            A, b = pair
            return np.hstack([A, -np.ones((A.shape[0], 1))]), b

        cons_ph1 = [augment(c) for c in cons_r]
        a_obj = np.zeros((1, n_red + 1))
        a_obj[0, -1] = 1.0
        obj_ph1 = (a_obj, np.zeros(1))

        u = np.append(w, slack + 1.0)
        ph1 = _BarrierSolver(obj_ph1, cons_ph1, tol=1e-8)

        def strictly_feasible(u_vec):
            return all(_lse(A, b, u_vec[:-1]) < -1e-7 for A, b in cons_r)

        u, _, ph1_status = ph1.minimize(u, stop_when=strictly_feasible)
        w = u[:-1]
        ph1_iterations = ph1.newton_count
        slack = max(float(_lse(A, b, w)) for A, b in cons_r)
        if slack >= -1e-12:
            status = "infeasible" if ph1_status != "max_iterations" else "max_iterations"
            return finish(w, status, ph1_iterations, [])

    ph2 = _BarrierSolver(obj_r, cons_r, tol=tol)
    w, trace, status = ph2.minimize(w)
    return finish(w, status, ph1_iterations + ph2.newton_count, trace)


def brute_force_oracle(problem: GpProblem, grid_points_per_dim: int = 200) -> GpResult:
    """Best feasible point of a log-space grid over the variable boxes.

    Independent reference for solver validation; restricted to <= 4 variables.
    Equalities are accepted within half a grid step.
    """
    n = problem.n_vars
    if n > 4:
        raise ValueError(f"grid oracle limited to 4 variables, got {n}")
    if not np.all(np.isfinite(problem.upper)):
        raise ValueError("grid oracle needs finite upper bounds")

    axes = [np.linspace(np.log(problem.lower[i]), np.log(problem.upper[i]),
                        grid_points_per_dim) for i in range(n)]
    steps = np.array([ax[1] - ax[0] if len(ax) > 1 else 0.0 for ax in axes])
    mesh = np.meshgrid(*axes, indexing="ij")
    Y = np.stack([m.ravel() for m in mesh], axis=1)

    cons = [_compile(p, n) for p in problem.inequalities]
    obj = _compile(problem.objective, n)
    eq_rows = []
    for mono in problem.equalities:
        a = np.zeros(n)
        for i, e in mono.exponents.items():
            a[i] = e
        eq_rows.append((a, -np.log(mono.coeff)))

    best_val = np.inf
    best_y = None
    chunk = 200_000
    for start in range(0, Y.shape[0], chunk):
        Yc = Y[start:start + chunk]
        feas = np.ones(Yc.shape[0], dtype=bool)
        for A, b in cons:
            feas &= logsumexp(Yc @ A.T + b, axis=1) <= 1e-9
            if not feas.any():
                break
        for a, rhs in eq_rows:
            tol_eq = 0.5 * float(np.abs(a) @ steps) + 1e-12
            feas &= np.abs(Yc @ a - rhs) <= tol_eq
        if not feas.any():
            continue
        vals = logsumexp(Yc[feas] @ obj[0].T + obj[1], axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_y = Yc[feas][j]

    if best_y is None:
        return GpResult(x=np.full(n, np.nan), objective=np.nan, status="infeasible")
    x = np.exp(best_y)
    return GpResult(x=x, objective=posynomial_eval(problem.objective, x), status="optimal",
                    max_violation=max((posynomial_eval(p, x) - 1.0
                                       for p in problem.inequalities), default=0.0))


def dump_problem(problem: GpProblem, path) -> None:
    """Plain-text dump of a problem (term lists) for bug reproduction."""
    def fmt(p: Posynomial) -> str:
        parts = []
        for t in p.terms:
            factors = "".join(f" * x{i}^{e:g}" for i, e in sorted(t.exponents.items()))
            parts.append(f"{t.coeff:.17g}{factors}")
        return "  +  ".join(parts)

    lines = [f"n_vars {problem.n_vars}",
             f"minimize {fmt(problem.objective)}"]
    for p in problem.inequalities:
        lines.append(f"subject_to {fmt(p)} <= 1")
    for m in problem.equalities:
        lines.append(f"subject_to {fmt(Posynomial.of(m))} == 1")
    lines.append("lower " + " ".join(f"{v:.17g}" for v in problem.lower))
    lines.append("upper " + " ".join(f"{v:.17g}" for v in problem.upper))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
