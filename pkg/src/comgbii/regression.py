"""Composite GBII regression with a log link on the tail location.

Observation i has tail location ``mu2_i = exp(x_i' beta)``.  The shapes
``exp(alpha) = (p1, p2, tau1, tau2, nu1, nu2)`` are shared, so every
observation follows the same composite law rescaled by ``mu2_i``: the head
location, the threshold and every quantile are proportional to ``mu2_i``,
while the mixing weight ``r`` is common to all.

Because both components peak at the threshold, the log-likelihood is
continuously differentiable in the parameters even though the head/tail
assignment of each observation moves with them.  The analytic gradient below
therefore only needs the current assignment.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import composite, gbii
from .composite import CompositeParams, ImpliedQuantities, mode_beta_point, mode_log_kernel, mode_offset
from .errors import ConstraintError, DataError, DomainError, NonFiniteError, SingularHessianError
from .families import ALPHA_NAMES, Family, get_family
from .solver import Problem, SolverConfig, solve
from .specfun import (
    beta_logpdf,
    digamma,
    inc_beta_da,
    inc_beta_db,
    log_beta,
    reg_inc_beta_pair,
)

__all__ = [
    "FitConfig",
    "RegressionModel",
    "FitReport",
    "location",
    "threshold",
    "conditional_moment",
    "shape_params",
    "loglik",
    "loglik_terms",
    "grad_loglik",
    "fit",
    "std_errors",
    "predict_var",
    "predict_cdf",
    "predict_sf",
]

log = logging.getLogger(__name__)

DEFAULT_ALPHA = np.log([2.0, 2.0, 1.5, 1.5, 1.2, 1.2])
# exp(40) ~ 2e17: shapes beyond this carry no information and risk overflow
MAX_LOG_SHAPE = 40.0


@dataclass(frozen=True)
class FitConfig:
    """Estimation settings.

    Attributes:
        solver: Augmented Lagrangian controls.
        eps1: Slack in log(p1 nu1) >= eps1.
        eps2: Slack in log(p2 nu2) >= eps2.
        restarts: Extra jittered starting points.
        jitter: Standard deviation of the log-shape jitter for restarts.
        compute_se: Whether to estimate the covariance after fitting.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    eps1: float = 1e-5
    eps2: float = 1e-5
    restarts: int = 5
    jitter: float = 0.5
    compute_se: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        solver = SolverConfig(**d.pop("solver", {}))
        return cls(solver=solver, **d)


# ---------------------------------------------------------------------------
# basic maps
# ---------------------------------------------------------------------------


def _check_alpha(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (6,):
        raise DomainError(f"alpha must have 6 entries (p1, p2, tau1, tau2, nu1, nu2), got shape {alpha.shape}")
    return alpha


def shape_params(alpha, mu2: float = 1.0, family: Optional[Family] = None) -> CompositeParams:
    """Composite parameters for a given alpha and tail location."""
    p1, p2, tau1, tau2, nu1, nu2 = np.exp(_check_alpha(alpha))
    head, tail = (family.head, family.tail) if family is not None else ("GBII", "GBII")
    return CompositeParams(mu2, p1, p2, nu1, nu2, tau1, tau2, head, tail)


def location(x, beta):
    """exp(x' beta); x may be a vector or an n-by-k matrix."""
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.shape[-1] != beta.shape[0]:
        raise DomainError(f"covariate dimension {x.shape[-1]} does not match beta dimension {beta.shape[0]}")
    eta = x @ beta
    return float(np.exp(eta)) if np.ndim(eta) == 0 else np.exp(eta)


def threshold(x, beta, alpha):
    """Per-observation threshold u(x) = mu2(x) ((p2 nu2 - 1)/(p2 tau2 + 1))^(1/p2)."""
    p1, p2, tau1, tau2, nu1, nu2 = np.exp(_check_alpha(alpha))
    if p2 * nu2 <= 1.0:
        raise ConstraintError(f"threshold requires p2*nu2 > 1 (got {p2 * nu2:.6g})")
    return location(x, beta) * math.exp(mode_offset(p2, nu2, tau2))


def conditional_moment(h: float, x, beta, alpha):
    """E[Y^h | x] = w(alpha) exp(x' beta)^h."""
    w = composite.moment(h, shape_params(alpha))
    return w * location(x, beta) ** h


# ---------------------------------------------------------------------------
# likelihood and gradient
# ---------------------------------------------------------------------------


@dataclass
class _ShapeTerms:
    """Shape-only pieces of the likelihood, optionally with derivatives.

    Derivative arrays are indexed in ALPHA_NAMES order and taken with respect
    to the natural parameters (not their logs).
    """

    theta: np.ndarray
    c1: float
    c2: float
    log_phi: float
    log_omega: float
    d_c1: Optional[np.ndarray] = None
    d_c2: Optional[np.ndarray] = None
    d_log_phi: Optional[np.ndarray] = None
    d_log_omega: Optional[np.ndarray] = None


def _dc(p, nu, tau):
    """(dc/dp, dc/dnu, dc/dtau) for c = log(mode/mu)."""
    m = math.log(p * nu - 1.0) - math.log1p(p * tau)
    return (-m / p**2 + (nu / (p * nu - 1.0) - tau / (p * tau + 1.0)) / p, 1.0 / (p * nu - 1.0), -1.0 / (p * tau + 1.0))


def _dA(p, nu, tau):
    """Derivatives of the mode log-kernel A(p, nu, tau)."""
    x, xc = mode_beta_point(p, nu, tau)
    return (
        nu**2 / (p * nu - 1.0) + tau**2 / (p * tau + 1.0) - (nu + tau) / p,
        math.log(x) + 1.0 / (p * nu - 1.0),
        math.log(xc) - 1.0 / (p * tau + 1.0),
    )


def _dpi(p, nu, tau):
    s = nu + tau
    return (1.0 / (p * p * s), (tau + 1.0 / p) / (s * s), -(nu - 1.0 / p) / (s * s))


def _d_mode_cdf(p, nu, tau, x, xc):
    """Total derivatives of I_{nu,tau}(pi(p,nu,tau)) w.r.t. (p, nu, tau)."""
    dens = math.exp(beta_logpdf(x, nu, tau, xc=xc))
    dpp, dpn, dpt = _dpi(p, nu, tau)
    return (
        dens * dpp,
        inc_beta_da(x, nu, tau, xc=xc) + dens * dpn,
        inc_beta_db(x, nu, tau, xc=xc) + dens * dpt,
    )


def _shape_terms(alpha, with_grad: bool) -> _ShapeTerms:
    alpha = _check_alpha(alpha)
    if not np.all(np.abs(alpha) < MAX_LOG_SHAPE):
        raise DomainError(f"log-shapes must lie within +-{MAX_LOG_SHAPE}: {alpha}")
    theta = np.exp(alpha)
    p1, p2, tau1, tau2, nu1, nu2 = theta
    if p1 * nu1 <= 1.0 or p2 * nu2 <= 1.0:
        raise ConstraintError("modes require p1*nu1 > 1 and p2*nu2 > 1")
    c1 = mode_offset(p1, nu1, tau1)
    c2 = mode_offset(p2, nu2, tau2)
    x1, x1c = mode_beta_point(p1, nu1, tau1)
    x2, x2c = mode_beta_point(p2, nu2, tau2)
    head_mass = reg_inc_beta_pair(x1, x1c, nu1, tau1)[0]
    tail_mass = reg_inc_beta_pair(x2, x2c, nu2, tau2)[1]
    log_phi = (
        math.log(p1)
        - math.log(p2)
        - log_beta(nu1, tau1)
        + log_beta(nu2, tau2)
        + mode_log_kernel(p1, nu1, tau1)
        - mode_log_kernel(p2, nu2, tau2)
    )
    phi = math.exp(log_phi)
    omega = head_mass + phi * tail_mass
    if not (omega > 0 and math.isfinite(omega)):
        raise NonFiniteError(f"normalizer is not finite/positive at alpha={alpha}")
    terms = _ShapeTerms(theta=theta, c1=c1, c2=c2, log_phi=log_phi, log_omega=math.log(omega))
    if not with_grad:
        return terms
    # index map into ALPHA_NAMES order: p1, p2, tau1, tau2, nu1, nu2
    P1, P2, T1, T2, N1, N2 = range(6)
    d_c1 = np.zeros(6)
    d_c2 = np.zeros(6)
    d_c1[P1], d_c1[N1], d_c1[T1] = _dc(p1, nu1, tau1)
    d_c2[P2], d_c2[N2], d_c2[T2] = _dc(p2, nu2, tau2)

    dA1 = _dA(p1, nu1, tau1)
    dA2 = _dA(p2, nu2, tau2)
    psi1, psi2 = digamma(nu1 + tau1), digamma(nu2 + tau2)
    d_log_phi = np.zeros(6)
    d_log_phi[P1] = 1.0 / p1 + dA1[0]
    d_log_phi[N1] = -(digamma(nu1) - psi1) + dA1[1]
    d_log_phi[T1] = -(digamma(tau1) - psi1) + dA1[2]
    d_log_phi[P2] = -1.0 / p2 - dA2[0]
    d_log_phi[N2] = (digamma(nu2) - psi2) - dA2[1]
    d_log_phi[T2] = (digamma(tau2) - psi2) - dA2[2]

    dI1 = _d_mode_cdf(p1, nu1, tau1, x1, x1c)
    dI2 = _d_mode_cdf(p2, nu2, tau2, x2, x2c)
    d_head = np.zeros(6)
    d_tail = np.zeros(6)
    d_head[P1], d_head[N1], d_head[T1] = dI1
    d_tail[P2], d_tail[N2], d_tail[T2] = (-v for v in dI2)
    d_omega = d_head + phi * tail_mass * d_log_phi + phi * d_tail
    terms.d_c1, terms.d_c2 = d_c1, d_c2
    terms.d_log_phi = d_log_phi
    terms.d_log_omega = d_omega / omega
    return terms


def _gbii_logpdf_z(log_y, z, p, nu, tau, log_b):
    return math.log(p) - log_b - log_y - nu * np.logaddexp(0.0, -z) - tau * np.logaddexp(0.0, z)


def _prepare(y, X, beta):
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    beta = np.asarray(beta, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise DomainError(f"{y.shape[0]} responses but {X.shape[0]} covariate rows")
    if X.shape[1] != beta.shape[0]:
        raise DomainError(f"design has {X.shape[1]} columns but beta has {beta.shape[0]} entries")
    if not np.all(y > 0):
        raise DomainError("all responses must be positive")
    return y, X, beta


def loglik_terms(y, X, beta, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation log-likelihood contributions and head indicators."""
    y, X, beta = _prepare(y, X, beta)
    st = _shape_terms(alpha, with_grad=False)
    p1, p2, tau1, tau2, nu1, nu2 = st.theta
    log_y = np.log(y)
    eta = X @ beta
    head = log_y <= eta + st.c2
    out = np.empty(y.shape)
    if np.any(head):
        z1 = p1 * (log_y[head] - (eta[head] + st.c2 - st.c1))
        out[head] = _gbii_logpdf_z(log_y[head], z1, p1, nu1, tau1, log_beta(nu1, tau1)) - st.log_omega
    if np.any(~head):
        z2 = p2 * (log_y[~head] - eta[~head])
        out[~head] = _gbii_logpdf_z(log_y[~head], z2, p2, nu2, tau2, log_beta(nu2, tau2)) + st.log_phi - st.log_omega
    return out, head


def loglik(y, X, beta, alpha) -> float:
    """Total log-likelihood."""
    terms, _ = loglik_terms(y, X, beta, alpha)
    total = float(np.sum(terms))
    if not math.isfinite(total):
        raise NonFiniteError("log-likelihood is not finite; parameters are degenerate")
    return total


def _component_grads(log_y, log_mu, p, nu, tau):
    """Per-observation partials of log f w.r.t. (p, nu, tau, log mu) at fixed mu."""
    d = log_y - log_mu
    z = p * d
    sig, sig_c = gbii._sigmoid_pair(z)
    psi_s = digamma(nu + tau)
    g_p = 1.0 / p + (nu * sig_c - tau * sig) * d
    g_nu = psi_s - digamma(nu) - np.logaddexp(0.0, -z)
    g_tau = psi_s - digamma(tau) - np.logaddexp(0.0, z)
    g_mu = p * (tau * sig - nu * sig_c)
    return g_p, g_nu, g_tau, g_mu


def value_and_grad(y, X, beta, alpha) -> tuple[float, np.ndarray]:
    """Log-likelihood and its gradient with respect to (beta, alpha).

    The gradient has length k + 6: the beta block followed by the alpha block
    in (p1, p2, tau1, tau2, nu1, nu2) order.
    """
    y, X, beta = _prepare(y, X, beta)
    st = _shape_terms(alpha, with_grad=True)
    p1, p2, tau1, tau2, nu1, nu2 = st.theta
    P1, P2, T1, T2, N1, N2 = range(6)
    n = y.shape[0]
    log_y = np.log(y)
    eta = X @ beta
    head = log_y <= eta + st.c2
    tail = ~head
    g_eta = np.zeros(n)
    g_theta = -n * st.d_log_omega
    total = -n * st.log_omega
    if np.any(head):
        log_mu1 = eta[head] + st.c2 - st.c1
        z1 = p1 * (log_y[head] - log_mu1)
        total += float(np.sum(_gbii_logpdf_z(log_y[head], z1, p1, nu1, tau1, log_beta(nu1, tau1))))
        g_p, g_nu, g_tau, g_mu = _component_grads(log_y[head], log_mu1, p1, nu1, tau1)
        g_eta[head] = g_mu
        s_mu = float(np.sum(g_mu))
        g_theta[P1] += float(np.sum(g_p))
        g_theta[N1] += float(np.sum(g_nu))
        g_theta[T1] += float(np.sum(g_tau))
        g_theta += s_mu * (st.d_c2 - st.d_c1)
    if np.any(tail):
        z2 = p2 * (log_y[tail] - eta[tail])
        total += float(np.sum(_gbii_logpdf_z(log_y[tail], z2, p2, nu2, tau2, log_beta(nu2, tau2))))
        total += int(tail.sum()) * st.log_phi
        g_p, g_nu, g_tau, g_mu = _component_grads(log_y[tail], eta[tail], p2, nu2, tau2)
        g_eta[tail] = g_mu
        g_theta[P2] += float(np.sum(g_p))
        g_theta[N2] += float(np.sum(g_nu))
        g_theta[T2] += float(np.sum(g_tau))
        g_theta += int(tail.sum()) * st.d_log_phi
    if not math.isfinite(total) or not np.all(np.isfinite(g_theta)):
        raise NonFiniteError("log-likelihood or gradient is not finite")
    grad = np.concatenate([X.T @ g_eta, g_theta * st.theta])
    return total, grad


def grad_loglik(y, X, beta, alpha) -> np.ndarray:
    """Analytic gradient of :func:`loglik` with respect to (beta, alpha)."""
    return value_and_grad(y, X, beta, alpha)[1]


# ---------------------------------------------------------------------------
# fitted model
# ---------------------------------------------------------------------------


@dataclass
class RegressionModel:
    """A fitted (or specified) composite GBII regression.

    Attributes:
        beta: Coefficients of log mu2.
        alpha: Full log-shape vector (p1, p2, tau1, tau2, nu1, nu2).
        family: Roster name, e.g. ``"BG"``.
        covariate_names: Names of the design columns, intercept first.
        covariance: Covariance of the free parameters (beta, then free alpha).
        nll: Negative log-likelihood at the estimate.
        n: Number of observations used.
        status: Solver status.
        config: Echo of the fit configuration.
    """

    beta: np.ndarray
    alpha: np.ndarray
    family: str = "ComGBII"
    covariate_names: tuple = ("(Intercept)",)
    covariance: Optional[np.ndarray] = None
    nll: float = math.nan
    n: int = 0
    status: str = "specified"
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.alpha = _check_alpha(self.alpha).copy()
        self.covariate_names = tuple(self.covariate_names)
        if len(self.covariate_names) != self.beta.shape[0]:
            self.covariate_names = tuple(f"x{j}" for j in range(self.beta.shape[0]))
        if self.covariance is not None:
            self.covariance = np.asarray(self.covariance, dtype=float)

    @property
    def fam(self) -> Family:
        return get_family(self.family)

    @property
    def n_params(self) -> int:
        return self.beta.shape[0] + self.fam.n_free_shapes

    @property
    def shapes(self) -> dict:
        return dict(zip(ALPHA_NAMES, np.exp(self.alpha)))

    @property
    def free_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.fam.restrict(self.alpha)])

    @property
    def free_names(self) -> list[str]:
        return list(self.covariate_names) + [f"alpha_{n}" for n in self.fam.free_names]

    def params_at(self, x) -> CompositeParams:
        """Composite parameters for a single covariate row."""
        return shape_params(self.alpha, location(x, self.beta), self.fam)

    def base(self) -> CompositeParams:
        """The standardized law (mu2 = 1) shared by all observations."""
        return shape_params(self.alpha, 1.0, self.fam)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "head_family": self.fam.head,
            "tail_family": self.fam.tail,
            "covariates": list(self.covariate_names),
            "beta": [float(v) for v in self.beta],
            "alpha": {name: float(v) for name, v in zip(ALPHA_NAMES, self.alpha)},
            "fixed": sorted(set(self.fam.fixed) | set(self.fam.tied)),
            "covariance": None if self.covariance is None else [[float(v) for v in row] for row in self.covariance],
            "nll": float(self.nll),
            "n": int(self.n),
            "status": self.status,
            "config": self.config,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        try:
            alpha = [d["alpha"][name] for name in ALPHA_NAMES]
            return cls(
                beta=np.asarray(d["beta"], dtype=float),
                alpha=np.asarray(alpha, dtype=float),
                family=d.get("family", "ComGBII"),
                covariate_names=tuple(d.get("covariates", ())),
                covariance=None if d.get("covariance") is None else np.asarray(d["covariance"], dtype=float),
                nll=float(d.get("nll", math.nan)),
                n=int(d.get("n", 0)),
                status=d.get("status", "specified"),
                config=d.get("config", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from exc


@dataclass
class FitReport:
    """Diagnostics from :func:`fit`."""

    status: str
    nll: float
    aic: float
    bic: float
    n_params: int
    n_outer: int
    grad_norm: float
    max_violation: float
    lam: list
    trace: list
    se_error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _adjust_feasible(alpha: np.ndarray, family: Family, target: float = math.log(2.4), floor: float = math.log(1.5)):
    """Push a free slot so that log(p_j nu_j) >= floor for both components."""
    alpha = family.expand(family.restrict(alpha))
    free = set(family.free_names)
    for p_name, nu_name in (("p1", "nu1"), ("p2", "nu2")):
        ip, inu = ALPHA_NAMES.index(p_name), ALPHA_NAMES.index(nu_name)
        if alpha[ip] + alpha[inu] >= floor:
            continue
        for slot, other in ((p_name, inu), (nu_name, ip)):
            if slot in free:
                tied_to_slot = [t for t, src in family.tied.items() if src == slot]
                if tied_to_slot and any(ALPHA_NAMES.index(t) in (ip, inu) for t in tied_to_slot):
                    # p and nu move together (nu = p): split the target evenly
                    alpha[ALPHA_NAMES.index(slot)] = target / 2.0
                else:
                    alpha[ALPHA_NAMES.index(slot)] = target - alpha[other]
                alpha = family.expand(family.restrict(alpha))
                break
    return alpha


def initial_values(y, X, family: Family) -> tuple[np.ndarray, np.ndarray]:
    """OLS of log y on X for beta and the default shapes for alpha."""
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    alpha = DEFAULT_ALPHA.copy()
    for name, value in family.fixed.items():
        alpha[ALPHA_NAMES.index(name)] = math.log(value)
    return coef, _adjust_feasible(alpha, family)


def _make_problem(y, X, family: Family, config: FitConfig, beta0, alpha0) -> Problem:
    k = X.shape[1]
    A, b = family.affine
    eps = np.array([config.eps1, config.eps2])
    # h(theta) = eps - C @ alpha_full with C picking (a1 + a5) and (a2 + a6)
    C = np.zeros((2, 6))
    C[0, [0, 4]] = 1.0
    C[1, [1, 5]] = 1.0
    CA = C @ A
    Cb = C @ b
    jac = np.hstack([np.zeros((2, k)), -CA])

    def split(theta):
        return theta[:k], A @ theta[k:] + b

    def value_and_grad_neg(theta):
        beta, alpha = split(theta)
        val, grad = value_and_grad(y, X, beta, alpha)
        return -val, -np.concatenate([grad[:k], A.T @ grad[k:]])

    def constraints(theta):
        return eps - CA @ theta[k:] - Cb

    def state_key(theta):
        beta, alpha = split(theta)
        try:
            _, head = loglik_terms(y, X, beta, alpha)
        except (ConstraintError, NonFiniteError):
            return None
        return np.packbits(head).tobytes()

    x0 = np.concatenate([beta0, family.restrict(alpha0)])

    def sample_start(rng):
        alpha = family.expand(family.restrict(alpha0) + config.jitter * rng.standard_normal(family.n_free_shapes))
        alpha = _adjust_feasible(alpha, family)
        beta = np.array(beta0, dtype=float)
        beta[0] += 0.25 * rng.standard_normal()
        return np.concatenate([beta, family.restrict(alpha)])

    return Problem(
        value_and_grad=value_and_grad_neg,
        constraints=constraints,
        constraint_jac=lambda theta: jac,
        x0=x0,
        state_key=state_key,
        sample_start=sample_start,
    )


def fit(
    y,
    X,
    family: str | Family = "ComGBII",
    config: FitConfig = FitConfig(),
    seed=None,
    covariate_names: Optional[Sequence[str]] = None,
    start: Optional[RegressionModel] = None,
) -> tuple[RegressionModel, FitReport]:
    """Constrained maximum likelihood for the composite regression.

    Args:
        y: Positive responses.
        X: Design matrix with an intercept column.
        family: Roster name or :class:`Family`.
        config: Estimation settings.
        seed: Seed for the restart jitter.
        covariate_names: Column names for reporting.
        start: Optional warm start (its beta and alpha are used as the
            first starting point).

    Raises:
        DataError: Too few observations or a rank-deficient design.
    """
    fam = family if isinstance(family, Family) else get_family(family)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape[0] != n:
        raise DataError(f"{y.shape[0]} responses but {n} design rows")
    if not np.all(y > 0):
        raise DataError("all responses must be positive")
    n_params = k + fam.n_free_shapes
    if n <= n_params:
        raise DataError(f"need more observations than parameters: n={n}, parameters={n_params}")
    if np.linalg.matrix_rank(X) < k:
        raise DataError("design matrix is rank deficient")
    if start is not None:
        beta0 = np.asarray(start.beta, dtype=float)
        alpha0 = _adjust_feasible(np.asarray(start.alpha, dtype=float), fam)
    else:
        beta0, alpha0 = initial_values(y, X, fam)
    problem = _make_problem(y, X, fam, config, beta0, alpha0)
    solver_cfg = config.solver
    if solver_cfg.restarts != config.restarts:
        solver_cfg = SolverConfig(**{**asdict(solver_cfg), "restarts": config.restarts})
    result = solve(problem, solver_cfg, seed=seed)
    beta = result.x[:k]
    alpha = fam.expand(result.x[k:])
    nll = result.fun
    model = RegressionModel(
        beta=beta,
        alpha=alpha,
        family=fam.name,
        covariate_names=tuple(covariate_names) if covariate_names is not None else tuple(f"x{j}" for j in range(k)),
        nll=nll,
        n=n,
        status=result.status,
        config=config.to_dict(),
    )
    se_error = None
    if config.compute_se:
        try:
            model.covariance = covariance(model, y, X)
        except SingularHessianError as exc:
            se_error = str(exc)
            log.warning("standard errors unavailable: %s", exc)
    aic = 2.0 * nll + 2.0 * n_params
    bic = 2.0 * nll + n_params * math.log(n)
    report = FitReport(
        status=result.status,
        nll=nll,
        aic=aic,
        bic=bic,
        n_params=n_params,
        n_outer=result.n_outer,
        grad_norm=result.grad_norm,
        max_violation=result.max_violation,
        lam=[float(v) for v in result.lam],
        trace=result.trace,
        se_error=se_error,
    )
    return model, report


def free_gradient(model: RegressionModel, y, X) -> np.ndarray:
    """Gradient of the log-likelihood in the model's free coordinates."""
    A, _ = model.fam.affine
    k = model.beta.shape[0]
    g = grad_loglik(y, X, model.beta, model.alpha)
    return np.concatenate([g[:k], A.T @ g[k:]])


def hessian(model: RegressionModel, y, X, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of the log-likelihood in free coordinates."""
    fam = model.fam
    A, b = fam.affine
    k = model.beta.shape[0]
    theta = model.free_vector
    d = theta.size
    H = np.empty((d, d))

    def grad_at(t):
        g = grad_loglik(y, X, t[:k], A @ t[k:] + b)
        return np.concatenate([g[:k], A.T @ g[k:]])

    for j in range(d):
        h = rel_step * max(1.0, abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        H[:, j] = (grad_at(tp) - grad_at(tm)) / (2.0 * h)
    return 0.5 * (H + H.T)


def covariance(model: RegressionModel, y, X) -> np.ndarray:
    """Inverse observed information in free coordinates.

    Raises:
        SingularHessianError: The information matrix is not positive definite
            or is numerically singular.
    """
    try:
        info = -hessian(model, y, X)
    except (ConstraintError, DomainError) as exc:
        # difference steps left the parameter space: the estimate sits on a mode constraint
        raise SingularHessianError(f"estimate lies on the constraint boundary ({exc})", math.inf) from exc
    eig = np.linalg.eigvalsh(info)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    if eig[0] <= 0 or cond > 1e14:
        raise SingularHessianError(f"observed information is singular or indefinite (condition number {cond:.3g})", cond)
    return np.linalg.inv(info)


def _implied_vector(theta, model: RegressionModel, x0) -> np.ndarray:
    k = model.beta.shape[0]
    alpha = model.fam.expand(theta[k:])
    prm = shape_params(alpha, location(x0, theta[:k]))
    imp = composite.derive_implied(prm)
    return np.array([prm.mu2, imp.mu1, imp.u, imp.r])


def std_errors(model: RegressionModel, y=None, X=None, x0=None) -> dict:
    """Standard errors on the natural scale, with implied quantities by the delta method.

    Args:
        model: Fitted model; its covariance is computed from (y, X) if absent.
        x0: Covariate row at which mu2, mu1, u and r are reported; defaults
            to the baseline row (intercept one, other covariates zero).

    Returns:
        Mapping from parameter name to standard error.  Pinned or tied shape
        slots map to ``None``.
    """
    cov = model.covariance
    if cov is None:
        if y is None or X is None:
            raise DomainError("model has no covariance; pass the data to compute it")
        cov = covariance(model, y, X)
    k = model.beta.shape[0]
    fam = model.fam
    se_free = np.sqrt(np.diag(cov))
    out: dict[str, Optional[float]] = {}
    for name, s in zip(model.covariate_names, se_free[:k]):
        out[name] = float(s)
    A, _ = fam.affine
    cov_alpha = A @ cov[k:, k:] @ A.T
    theta_nat = np.exp(model.alpha)
    for i, name in enumerate(ALPHA_NAMES):
        out[name] = None if fam.is_fixed(name) else float(theta_nat[i] * math.sqrt(cov_alpha[i, i]))
    if x0 is None:
        x0 = np.zeros(k)
        x0[0] = 1.0
    theta = model.free_vector
    J = np.empty((4, theta.size))
    for j in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        J[:, j] = (_implied_vector(tp, model, x0) - _implied_vector(tm, model, x0)) / (2.0 * h)
    cov_imp = J @ cov @ J.T
    for i, name in enumerate(("mu2", "mu1", "u", "r")):
        out[name] = float(math.sqrt(max(cov_imp[i, i], 0.0)))
    return out


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def predict_var(model: RegressionModel, X, q: float):
    """Per-row VaR_q: mu2(x) times the standardized composite quantile."""
    z = composite.var_q(q, model.base())
    return location(np.asarray(X, dtype=float), model.beta) * z


def predict_cdf(model: RegressionModel, y, X):
    """Per-observation composite CDF F(y_i | x_i)."""
    mu2 = location(np.asarray(X, dtype=float), model.beta)
    return composite.cdf(np.asarray(y, dtype=float) / mu2, model.base())


def predict_sf(model: RegressionModel, y, X):
    """Per-observation survival 1 - F(y_i | x_i)."""
    mu2 = location(np.asarray(X, dtype=float), model.beta)
    return composite.sf(np.asarray(y, dtype=float) / mu2, model.base())


def wald_table(model: RegressionModel) -> list[dict]:
    """Estimate, S.E., Z and two-sided p-value for each free parameter."""
    rows = []
    se = np.sqrt(np.diag(model.covariance)) if model.covariance is not None else np.full(model.free_vector.size, math.nan)
    for name, est, s in zip(model.free_names, model.free_vector, se):
        zval = est / s if s > 0 else math.nan
        pval = 2.0 * stats.norm.sf(abs(zval)) if math.isfinite(zval) else math.nan
        rows.append({"parameter": name, "estimate": float(est), "se": float(s), "z": float(zval), "p_value": float(pval)})
    return rows
