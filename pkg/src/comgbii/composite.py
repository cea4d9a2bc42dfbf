"""Composite (spliced) GBII distribution with mode-matched threshold.

The head component GBII(p1, mu1, nu1, tau1) is truncated above ``u`` and the
tail component GBII(p2, mu2, nu2, tau2) is truncated below ``u``.  Both
components have their mode at ``u``, which fixes ``mu1`` given ``mu2`` and
makes the spliced density continuous and flat at the threshold.  The mixing
weight ``r`` is then pinned by continuity and depends on the shapes only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import gbii
from .errors import ConstraintError, DomainError, ExistenceError
from .gbii import GbiiParams
from .specfun import log_beta, reg_inc_beta_log_pair, reg_inc_beta_pair

__all__ = [
    "CompositeParams",
    "ImpliedQuantities",
    "derive_implied",
    "pdf",
    "logpdf",
    "cdf",
    "sf",
    "moment",
    "sample",
    "var_q",
    "tvar_q",
    "CompositeGBII",
]


@dataclass(frozen=True)
class CompositeParams:
    """Free parameters of the composite model.

    ``head_family`` and ``tail_family`` are subfamily tags (see
    :mod:`comgbii.gbii`); they only record which slots are pinned and do not
    change how the distribution is evaluated.
    """

    mu2: float
    p1: float
    p2: float
    nu1: float
    nu2: float
    tau1: float
    tau2: float
    head_family: str = "GBII"
    tail_family: str = "GBII"

    def __post_init__(self):
        vals = (self.mu2, self.p1, self.p2, self.nu1, self.nu2, self.tau1, self.tau2)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise DomainError(f"composite parameters must be finite and positive: {vals}")
        if self.p1 * self.nu1 <= 1.0:
            raise ConstraintError(f"head mode requires p1*nu1 > 1 (got {self.p1 * self.nu1:.6g})")
        if self.p2 * self.nu2 <= 1.0:
            raise ConstraintError(f"tail mode requires p2*nu2 > 1 (got {self.p2 * self.nu2:.6g})")

    @property
    def shapes(self) -> tuple[float, ...]:
        """Shape vector in the (p1, p2, tau1, tau2, nu1, nu2) order used by alpha."""
        return (self.p1, self.p2, self.tau1, self.tau2, self.nu1, self.nu2)

    def with_mu2(self, mu2: float) -> "CompositeParams":
        return CompositeParams(mu2, self.p1, self.p2, self.nu1, self.nu2, self.tau1, self.tau2, self.head_family, self.tail_family)


@dataclass(frozen=True)
class ImpliedQuantities:
    """Quantities pinned by mode matching and continuity.

    Attributes:
        mu1: Head location.
        u: Threshold, the common mode.
        r: Head probability mass.
        phi: Ratio of component densities at u, f1(u)/f2(u).
        head_mass: F1(u), the head CDF at the threshold.
        tail_mass: 1 - F2(u), the tail survival at the threshold.
    """

    mu1: float
    u: float
    r: float
    phi: float
    head_mass: float
    tail_mass: float

    @property
    def log_omega(self) -> float:
        """log(F1(u) + phi (1 - F2(u))), the head normalizer r / F1(u) inverted."""
        return math.log(self.head_mass) - math.log(self.r)


def mode_offset(p: float, nu: float, tau: float) -> float:
    """log(mode / mu) = (1/p) log((p nu - 1)/(p tau + 1))."""
    return (math.log(p * nu - 1.0) - math.log1p(p * tau)) / p


def mode_log_kernel(p: float, nu: float, tau: float) -> float:
    """nu z - (nu + tau) log(1 + e^z) evaluated at the mode.

    At the mode sigmoid(z) equals the beta-scale point x, so the kernel is
    nu log x + tau log(1 - x).
    """
    x, xc = mode_beta_point(p, nu, tau)
    return nu * math.log(x) + tau * math.log(xc)


def mode_beta_point(p: float, nu: float, tau: float) -> tuple[float, float]:
    """Beta-scale argument at the mode and its complement."""
    s = p * (nu + tau)
    return (p * nu - 1.0) / s, (p * tau + 1.0) / s


def derive_implied(params: CompositeParams) -> ImpliedQuantities:
    """Solve the mode-matching and continuity conditions."""
    c1 = mode_offset(params.p1, params.nu1, params.tau1)
    c2 = mode_offset(params.p2, params.nu2, params.tau2)
    u = params.mu2 * math.exp(c2)
    mu1 = params.mu2 * math.exp(c2 - c1)
    x1, x1c = mode_beta_point(params.p1, params.nu1, params.tau1)
    x2, x2c = mode_beta_point(params.p2, params.nu2, params.tau2)
    head_mass = reg_inc_beta_pair(x1, x1c, params.nu1, params.tau1)[0]
    tail_mass = reg_inc_beta_pair(x2, x2c, params.nu2, params.tau2)[1]
    log_phi = (
        math.log(params.p1)
        - math.log(params.p2)
        - log_beta(params.nu1, params.tau1)
        + log_beta(params.nu2, params.tau2)
        + mode_log_kernel(params.p1, params.nu1, params.tau1)
        - mode_log_kernel(params.p2, params.nu2, params.tau2)
    )
    phi = math.exp(log_phi)
    r = head_mass / (head_mass + phi * tail_mass)
    return ImpliedQuantities(mu1=mu1, u=u, r=r, phi=phi, head_mass=head_mass, tail_mass=tail_mass)


def head_params(params: CompositeParams, implied: ImpliedQuantities) -> GbiiParams:
    return GbiiParams(params.p1, implied.mu1, params.nu1, params.tau1)


def tail_params(params: CompositeParams) -> GbiiParams:
    return GbiiParams(params.p2, params.mu2, params.nu2, params.tau2)


def _resolve(params, implied):
    return implied if implied is not None else derive_implied(params)


def _as_out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def logpdf(y, params: CompositeParams, implied: ImpliedQuantities | None = None):
    """Log density; y = u is assigned to the head."""
    imp = _resolve(params, implied)
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        raise DomainError("composite density requires y > 0")
    head = y <= imp.u
    out = np.empty(y.shape)
    log_omega = imp.log_omega
    if np.any(head):
        out[head] = gbii.logpdf(y[head], head_params(params, imp)) - log_omega
    if np.any(~head):
        out[~head] = gbii.logpdf(y[~head], tail_params(params)) + math.log(imp.phi) - log_omega
    return _as_out(out)


def pdf(y, params: CompositeParams, implied: ImpliedQuantities | None = None):
    """Spliced density r f1/F1(u) below u and (1-r) f2/(1-F2(u)) above."""
    return _as_out(np.exp(logpdf(y, params, implied)))


def _cdf_sf(y, params, implied):
    imp = _resolve(params, implied)
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        raise DomainError("composite cdf requires y > 0")
    lower = np.empty(y.shape)
    upper = np.empty(y.shape)
    head = y <= imp.u
    if np.any(head):
        f1 = np.asarray(gbii.cdf(y[head], head_params(params, imp)))
        lower[head] = imp.r * f1 / imp.head_mass
        upper[head] = 1.0 - lower[head]
    if np.any(~head):
        s2 = np.asarray(gbii.sf(y[~head], tail_params(params)))
        upper[~head] = (1.0 - imp.r) * s2 / imp.tail_mass
        lower[~head] = 1.0 - upper[~head]
    return lower, upper


def cdf(y, params: CompositeParams, implied: ImpliedQuantities | None = None):
    """Composite CDF; equals r at the threshold."""
    return _as_out(_cdf_sf(y, params, implied)[0])


def sf(y, params: CompositeParams, implied: ImpliedQuantities | None = None):
    """Composite survival function."""
    return _as_out(_cdf_sf(y, params, implied)[1])


def _check_existence(h, params):
    for p, nu, tau, tag in ((params.p1, params.nu1, params.tau1, "head"), (params.p2, params.nu2, params.tau2, "tail")):
        lo, hi = -p * nu, p * tau
        if not (lo + gbii.EXISTENCE_SLACK < h < hi - gbii.EXISTENCE_SLACK):
            raise ExistenceError(f"moment of order {h} requires {lo:.6g} < h < {hi:.6g} in the {tag} component")


def moment(h: float, params: CompositeParams, implied: ImpliedQuantities | None = None) -> float:
    """E[Y^h] as the r-weighted sum of the truncated component moments."""
    _check_existence(h, params)
    if h == 0:
        return 1.0
    imp = _resolve(params, implied)
    head = gbii.incomplete_moment(h, imp.u, "below", head_params(params, imp))
    tail = gbii.incomplete_moment(h, imp.u, "above", tail_params(params))
    return imp.r * head + (1.0 - imp.r) * tail


def _var_from_split(q, upper_q, params, imp):
    """Quantile given q and its complement 1 - q, both arrays."""
    out = np.empty(q.shape)
    head = q <= imp.r
    if np.any(head):
        target = q[head] * imp.head_mass / imp.r
        target = np.minimum(target, imp.head_mass)
        out[head] = gbii.quantile(target, head_params(params, imp))
    if np.any(~head):
        target = upper_q[~head] * imp.tail_mass / (1.0 - imp.r)
        target = np.minimum(target, imp.tail_mass)
        out[~head] = gbii.isf(target, tail_params(params))
    # the two branches meet at u; guard against round-off stepping over it
    out[head] = np.minimum(out[head], imp.u)
    out[~head] = np.maximum(out[~head], imp.u)
    return out


def var_q(q, params: CompositeParams, implied: ImpliedQuantities | None = None):
    """Value-at-risk: the q-quantile of the composite distribution."""
    imp = _resolve(params, implied)
    qa = np.asarray(q, dtype=float)
    if not np.all((qa > 0) & (qa < 1)):
        raise DomainError("quantile level must lie in (0, 1)")
    qa = np.atleast_1d(qa)
    out = _var_from_split(qa, 1.0 - qa, params, imp)
    return float(out[0]) if np.ndim(q) == 0 else out.reshape(np.shape(q))


def sample(n: int, params: CompositeParams, implied: ImpliedQuantities | None = None, seed=None) -> np.ndarray:
    """Draw n variates by inverse transform; ``seed`` may be an int or Generator."""
    if n < 1:
        raise DomainError("sample size must be >= 1")
    imp = _resolve(params, implied)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = rng.random(n)
    q = np.where(q == 0.0, np.nextafter(0.0, 1.0), q)
    return _var_from_split(q, 1.0 - q, params, imp)


def _head_partial_mean(a: float, b: float, params: CompositeParams, imp: ImpliedQuantities) -> float:
    """Integral of y f1(y) over [a, b] within the head support."""
    hp = head_params(params, imp)
    if params.p1 * params.tau1 > 1.0 + 1e-9:
        m1 = gbii.moment(1.0, hp)
        shift = 1.0 / params.p1
        la, lac = gbii._log_sigmoid_pair(float(gbii._z(a, hp)))
        lb, lbc = gbii._log_sigmoid_pair(float(gbii._z(b, hp)))
        lo_a, up_a = reg_inc_beta_log_pair(la, lac, params.nu1 + shift, params.tau1 - shift)
        lo_b, up_b = reg_inc_beta_log_pair(lb, lbc, params.nu1 + shift, params.tau1 - shift)
        # difference taken on the smaller side for accuracy
        diff = lo_b - lo_a if lo_b < 0.5 else up_a - up_b
        return m1 * diff
    val, _ = integrate.quad(lambda y: y * gbii.pdf(y, hp), a, b, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def tvar_q(q: float, params: CompositeParams, implied: ImpliedQuantities | None = None) -> float:
    """Tail value-at-risk E[Y | Y > VaR_q].

    Above the threshold this is the tail component's conditional mean.  Below
    it, the head slice between VaR_q and u is integrated exactly and the whole
    tail beyond u is added with weight 1 - r.
    """
    imp = _resolve(params, implied)
    if not 0.0 < q < 1.0:
        raise DomainError("quantile level must lie in (0, 1)")
    if params.p2 * params.tau2 <= 1.0 + gbii.EXISTENCE_SLACK:
        raise ExistenceError(f"tail mean diverges: p2*tau2 = {params.p2 * params.tau2:.6g} <= 1")
    s = var_q(q, params, imp)
    tp = tail_params(params)
    if q > imp.r:
        return gbii.incomplete_moment(1.0, s, "above", tp)
    head_part = imp.r * _head_partial_mean(s, imp.u, params, imp) / imp.head_mass
    tail_part = (1.0 - imp.r) * gbii.incomplete_moment(1.0, imp.u, "above", tp)
    return (head_part + tail_part) / (1.0 - q)


class CompositeGBII:
    """Convenience wrapper binding parameters and their implied quantities."""

    def __init__(self, params: CompositeParams):
        self.params = params
        self.implied = derive_implied(params)

    def __repr__(self):
        return f"CompositeGBII({self.params!r})"

    @property
    def u(self) -> float:
        return self.implied.u

    @property
    def r(self) -> float:
        return self.implied.r

    def pdf(self, y):
        return pdf(y, self.params, self.implied)

    def logpdf(self, y):
        return logpdf(y, self.params, self.implied)

    def cdf(self, y):
        return cdf(y, self.params, self.implied)

    def sf(self, y):
        return sf(y, self.params, self.implied)

    def moment(self, h):
        return moment(h, self.params, self.implied)

    def var(self, q):
        return var_q(q, self.params, self.implied)

    def tvar(self, q):
        return tvar_q(q, self.params, self.implied)

    def sample(self, n, seed=None):
        return sample(n, self.params, self.implied, seed)
