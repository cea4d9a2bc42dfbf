"""Augmented Lagrangian solver for smooth problems with inequality constraints.

Minimizes ``f(theta)`` subject to ``h_k(theta) <= 0``.  Each outer iteration
minimizes the augmented objective with an L-BFGS inner solver, then updates
the multipliers and grows the penalty.  The objective may raise (or return a
non-finite value) outside its domain; the line search simply backs off.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ComGbiiError, ConvergenceError, DomainError

__all__ = [
    "SolverConfig",
    "SolverState",
    "Problem",
    "InnerResult",
    "SolveResult",
    "augmented_objective",
    "augmented_value_and_grad",
    "lbfgs",
    "solve",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Controls for the outer and inner iterations."""

    rho0: float = 1.0
    c: float = 10.0
    epsilon: float = 1e-6
    max_outer: int = 20
    inner_tol: float = 1e-8
    inner_max: int = 500
    restarts: int = 0
    feas_tol: float = 1e-6

    def __post_init__(self):
        if not self.rho0 > 0:
            raise DomainError("rho0 must be positive")
        if not self.c > 1:
            raise DomainError("penalty increment c must exceed 1")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.max_outer < 1 or self.inner_max < 1:
            raise DomainError("iteration caps must be >= 1")
        if self.restarts < 0:
            raise DomainError("restarts must be >= 0")


@dataclass
class SolverState:
    lam: np.ndarray
    rho: float
    iterate: np.ndarray
    grad_norm: float = math.inf

    def __post_init__(self):
        if np.any(self.lam < 0):
            raise DomainError("multipliers must be nonnegative")
        if not self.rho > 0:
            raise DomainError("penalty must be positive")


@dataclass
class Problem:
    """Callbacks describing ``min f(theta) s.t. h(theta) <= 0``.

    Attributes:
        value_and_grad: theta -> (f, grad f).
        constraints: theta -> h vector.
        constraint_jac: theta -> Jacobian of h, shape (k, d).
        x0: Starting point; the objective must be finite there.
        state_key: Optional theta -> hashable; convergence additionally
            requires this key to repeat across two outer iterations.
        sample_start: Optional rng -> theta used for restarts.
        prepare: Optional theta -> None hook invoked at the start of each
            outer iteration (e.g. to freeze piecewise structure).
    """

    value_and_grad: Callable
    constraints: Callable
    constraint_jac: Callable
    x0: np.ndarray
    state_key: Optional[Callable] = None
    sample_start: Optional[Callable] = None
    prepare: Optional[Callable] = None


@dataclass
class InnerResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    status: str


@dataclass
class SolveResult:
    """Outcome of :func:`solve`.

    ``status`` is ``"converged"``, ``"stalled"`` (no further progress with
    all constraints satisfied but the gradient above tolerance) or
    ``"max_outer"``.  The best iterate is returned in every case.
    """

    x: np.ndarray
    lam: np.ndarray
    fun: float
    status: str
    grad_norm: float
    max_violation: float
    n_outer: int
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _penalty_terms(h, lam, rho):
    """PHR penalty and its derivative with respect to h."""
    shifted = np.maximum(0.0, h + lam / rho)
    value = 0.5 * rho * shifted**2 - lam**2 / (2.0 * rho)
    return value, rho * shifted


def augmented_objective(theta, lam, rho, problem: Problem) -> float:
    """f + sum_k [ (rho/2) max(0, h_k + lam_k/rho)^2 - lam_k^2/(2 rho) ].

    Wherever h_k >= -lam_k/rho this equals f + lam_k h_k + (rho/2) max(0, h_k)^2.
    """
    f, _ = problem.value_and_grad(np.asarray(theta, dtype=float))
    h = np.asarray(problem.constraints(theta), dtype=float)
    pen, _ = _penalty_terms(h, np.asarray(lam, dtype=float), rho)
    return float(f + pen.sum())


def augmented_value_and_grad(theta, lam, rho, problem: Problem):
    theta = np.asarray(theta, dtype=float)
    f, g = problem.value_and_grad(theta)
    h = np.asarray(problem.constraints(theta), dtype=float)
    pen, dpen = _penalty_terms(h, np.asarray(lam, dtype=float), rho)
    J = np.atleast_2d(problem.constraint_jac(theta))
    return float(f + pen.sum()), np.asarray(g, dtype=float) + dpen @ J


def _safe_eval(fg, x):
    try:
        f, g = fg(x)
    except (ComGbiiError, ArithmeticError, ValueError):
        return math.inf, None
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        return math.inf, None
    return f, g


def _fd_hessian(fg: Callable, x: np.ndarray) -> Optional[np.ndarray]:
    d = x.size
    H = np.empty((d, d))
    for j in range(d):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        _, gp = _safe_eval(fg, xp)
        _, gm = _safe_eval(fg, xm)
        if gp is None or gm is None:
            return None
        H[:, j] = (gp - gm) / (2.0 * h)
    return 0.5 * (H + H.T)


def _newton_polish(fg: Callable, x, f, g, tol: float, max_steps: int = 20):
    """Newton steps on a finite-difference Hessian, accepted on gradient decrease.

    Near a minimum the objective stops resolving progress long before the
    gradient is small; the gradient itself is still informative, so these
    steps are judged by it (with the objective allowed only round-off growth).
    """
    for _ in range(max_steps):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        H = _fd_hessian(fg, x)
        if H is None:
            break
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            break
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        improved = False
        t = 1.0
        for _ in range(10):
            f_new, g_new = _safe_eval(fg, x + t * step)
            if g_new is not None and np.linalg.norm(g_new) < gnorm and f_new <= f + 1e-12 * max(1.0, abs(f)):
                x, f, g = x + t * step, f_new, g_new
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x, f, g


def lbfgs(fg: Callable, x0, tol: float = 1e-8, max_iter: int = 500, memory: int = 10) -> InnerResult:
    """Limited-memory BFGS with Armijo backtracking.

    Trial points where ``fg`` raises or returns non-finite values are treated
    as infinitely bad, which keeps iterates inside the objective's domain.
    If progress stalls above ``tol`` a short Newton polish is attempted.
    """
    res = _lbfgs_core(fg, x0, tol, max_iter, memory)
    if res.status in ("stalled", "line_search_failed") and np.linalg.norm(res.grad) > tol:
        x, f, g = _newton_polish(fg, res.x, res.fun, res.grad, tol)
        status = "converged" if np.linalg.norm(g) <= tol else res.status
        res = InnerResult(x, f, g, res.n_iter, status)
    return res


def _lbfgs_core(fg: Callable, x0, tol: float, max_iter: int, memory: int) -> InnerResult:
    x = np.asarray(x0, dtype=float).copy()
    f, g = _safe_eval(fg, x)
    if g is None:
        raise DomainError("objective is not finite at the starting point")
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    stall = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return InnerResult(x, f, g, it - 1, "converged")
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        else:
            gamma = 1.0 / max(gnorm, 1.0)
        d = gamma * q
        for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = (y @ d) / (y @ s)
            d += s * (a - b)
        d = -d
        slope = float(g @ d)
        if slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g / max(gnorm, 1.0)
            slope = float(g @ d)
        step = 1.0
        accepted = False
        for _ in range(60):
            x_new = x + step * d
            f_new, g_new = _safe_eval(fg, x_new)
            if g_new is not None and f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5 if g_new is not None else 0.1
        if not accepted:
            return InnerResult(x, f, g, it, "line_search_failed")
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        if decrease <= 1e-15 * max(1.0, abs(f)):
            stall += 1
            if stall >= 5:
                return InnerResult(x, f, g, it, "stalled")
        else:
            stall = 0
    return InnerResult(x, f, g, max_iter, "max_iter")


def _solve_from(problem: Problem, x0, config: SolverConfig) -> SolveResult:
    x = np.asarray(x0, dtype=float).copy()
    h0 = np.asarray(problem.constraints(x), dtype=float)
    state = SolverState(lam=np.zeros(h0.shape), rho=config.rho0, iterate=x)
    trace = []
    prev_key = None
    result = None
    for outer in range(1, config.max_outer + 1):
        if problem.prepare is not None:
            problem.prepare(state.iterate)
        key = problem.state_key(state.iterate) if problem.state_key is not None else None
        lam, rho = state.lam.copy(), state.rho

        def fg(theta, lam=lam, rho=rho):
            return augmented_value_and_grad(theta, lam, rho, problem)

        inner = lbfgs(fg, state.iterate, tol=config.inner_tol, max_iter=config.inner_max)
        x = inner.x
        f, _ = problem.value_and_grad(x)
        h = np.asarray(problem.constraints(x), dtype=float)
        grad_norm = float(np.linalg.norm(inner.grad))
        max_h = float(np.max(h)) if h.size else -math.inf
        new_lam = np.maximum(0.0, lam + rho * h)
        complementarity = float(np.max(np.abs(new_lam - lam))) / rho if h.size else 0.0
        trace.append(
            {
                "iteration": outer,
                "objective": float(f),
                "grad_norm": grad_norm,
                "max_h": max_h,
                "rho": rho,
                "lambda": [float(v) for v in lam],
                "inner_iter": inner.n_iter,
                "inner_status": inner.status,
            }
        )
        log.debug("outer %d: f=%.10g |grad|=%.3g max_h=%.3g rho=%.3g", outer, f, grad_norm, max_h, rho)
        prev_f = trace[-2]["objective"] if len(trace) > 1 else None
        new_key = problem.state_key(x) if problem.state_key is not None else None
        stable = problem.state_key is None or (new_key == key and (prev_key is None or prev_key == key))
        prev_key = key
        state = SolverState(lam=new_lam, rho=rho * config.c, iterate=x, grad_norm=grad_norm)
        result = SolveResult(
            x=x,
            lam=new_lam,
            fun=float(f),
            status="max_outer",
            grad_norm=grad_norm,
            max_violation=max(0.0, max_h),
            n_outer=outer,
            trace=trace,
        )
        if (
            grad_norm <= config.epsilon
            and max_h <= config.feas_tol
            and complementarity <= config.feas_tol
            and stable
        ):
            result.status = "converged"
            return result
        if (
            prev_f is not None
            and abs(prev_f - f) <= 1e-12 * max(1.0, abs(f))
            and np.array_equal(new_lam, lam)
            and max_h <= config.feas_tol
            and stable
        ):
            # nothing left to gain from a larger penalty: the inner solver is
            # stuck on a flat ridge with the constraints inactive
            result.status = "stalled"
            return result
    return result


def solve(problem: Problem, config: SolverConfig = SolverConfig(), seed=None) -> SolveResult:
    """Run the augmented Lagrangian method, plus ``config.restarts`` extra starts.

    Restart points come from ``problem.sample_start`` driven by ``seed``.  The
    best converged run wins; if none converged, the best run overall is
    returned with its non-converged status.
    """
    h0 = np.asarray(problem.constraints(np.asarray(problem.x0, dtype=float)), dtype=float)
    if h0.size and np.max(h0) > 0:
        # the penalty pulls infeasible starts back; only the objective must be finite there
        log.warning("starting point violates a constraint by %.3g", float(np.max(h0)))
    starts = [np.asarray(problem.x0, dtype=float)]
    if config.restarts and problem.sample_start is not None:
        rng = np.random.default_rng(seed)
        starts += [np.asarray(problem.sample_start(rng), dtype=float) for _ in range(config.restarts)]
    best = None
    failures = []
    for x0 in starts:
        try:
            res = _solve_from(problem, x0, config)
        except (ComGbiiError, ArithmeticError) as exc:
            failures.append(exc)
            continue
        if best is None or _better(res, best):
            best = res
    if best is None:
        raise ConvergenceError(f"all {len(starts)} starts failed; first error: {failures[0]}")
    return best


def _better(a: SolveResult, b: SolveResult) -> bool:
    if a.converged != b.converged:
        # a clearly better objective beats a converged-but-worse run
        if a.converged:
            return a.fun <= b.fun + 1e-6
        return a.fun < b.fun - 1e-6
    return a.fun < b.fun
