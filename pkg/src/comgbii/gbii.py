"""Four-parameter generalized beta distribution of the second kind (GBII).

The density is

    f(y) = |p| / (B(nu, tau) y) * (y/mu)^(p nu) / (1 + (y/mu)^p)^(nu + tau)

and with ``z = p (log y - log mu)`` the CDF is ``I_{nu,tau}(sigmoid(z))``.
Everything is evaluated through ``z`` so that very large ``p`` or ``tau``
(hundreds to millions) never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ExistenceError
from .specfun import inv_reg_inc_beta_log_pair, log_beta, reg_inc_beta_log_pair

__all__ = [
    "GbiiParams",
    "pdf",
    "logpdf",
    "cdf",
    "sf",
    "quantile",
    "isf",
    "mode",
    "moment",
    "incomplete_moment",
    "subfamily",
    "SUBFAMILIES",
]

EXISTENCE_SLACK = 1e-12


@dataclass(frozen=True)
class GbiiParams:
    """GBII parameters in canonical form (p > 0).

    A negative ``p`` is accepted and rewritten via the reciprocal identity
    ``GBII(-p, mu, tau, nu) = GBII(p, mu, nu, tau)``.

    Attributes:
        p: Scale/shape exponent.
        mu: Location, strictly positive.
        nu: First shape (controls the left tail).
        tau: Second shape (controls the right tail; tail index is p * tau).
        fixed: Names of slots held fixed during estimation.
    """

    p: float
    mu: float
    nu: float
    tau: float
    fixed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        p, mu, nu, tau = (float(v) for v in (self.p, self.mu, self.nu, self.tau))
        if not all(math.isfinite(v) for v in (p, mu, nu, tau)):
            raise DomainError(f"GBII parameters must be finite: {(p, mu, nu, tau)}")
        if p == 0:
            raise DomainError("GBII requires p != 0")
        if not (mu > 0 and nu > 0 and tau > 0):
            raise DomainError(f"GBII requires mu, nu, tau > 0 (got mu={mu}, nu={nu}, tau={tau})")
        if p < 0:
            p, nu, tau = -p, tau, nu
            swap = {"nu": "tau", "tau": "nu"}
            object.__setattr__(self, "fixed", frozenset(swap.get(s, s) for s in self.fixed))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "fixed", frozenset(self.fixed))

    def with_mu(self, mu: float) -> "GbiiParams":
        return GbiiParams(self.p, mu, self.nu, self.tau, self.fixed)

    # convenience wrappers so callers can write params.cdf(y)
    def pdf(self, y):
        return pdf(y, self)

    def logpdf(self, y):
        return logpdf(y, self)

    def cdf(self, y):
        return cdf(y, self)

    def sf(self, y):
        return sf(y, self)

    def quantile(self, q):
        return quantile(q, self)

    def isf(self, s):
        return isf(s, self)

    def mode(self) -> float:
        return mode(self)

    def moment(self, h: float) -> float:
        return moment(h, self)


def _check_y(y):
    arr = np.asarray(y, dtype=float)
    if not np.all(arr > 0):
        raise DomainError("GBII functions require y > 0")
    return arr


def _z(y, prm: GbiiParams):
    return prm.p * (np.log(y) - math.log(prm.mu))


def _sigmoid_pair(z):
    """Return (sigmoid(z), sigmoid(-z)) without cancellation."""
    if np.ndim(z) == 0:
        z = float(z)
        if z >= 0:
            e = math.exp(-z)
            return 1.0 / (1.0 + e), e / (1.0 + e)
        e = math.exp(z)
        return e / (1.0 + e), 1.0 / (1.0 + e)
    e = np.exp(-np.abs(z))
    big = 1.0 / (1.0 + e)
    small = e / (1.0 + e)
    pos = z >= 0
    return np.where(pos, big, small), np.where(pos, small, big)


def logpdf(y, prm: GbiiParams):
    """Log density, stable for extreme shapes."""
    y = _check_y(y)
    z = _z(y, prm)
    # nu z - (nu + tau) log(1 + e^z) rewritten without cancellation
    out = math.log(prm.p) - log_beta(prm.nu, prm.tau) - np.log(y) - prm.nu * np.logaddexp(0.0, -z) - prm.tau * np.logaddexp(0.0, z)
    return float(out) if np.ndim(out) == 0 else out


def pdf(y, prm: GbiiParams):
    """Density f(y)."""
    return np.exp(logpdf(y, prm)) if np.ndim(y) else math.exp(logpdf(y, prm))


def _log_sigmoid_pair(z):
    """Return (log sigmoid(z), log sigmoid(-z)); finite for any real z."""
    return -np.logaddexp(0.0, -z), -np.logaddexp(0.0, z)


def _cdf_sf(y, prm: GbiiParams):
    y = _check_y(y)
    z = _z(y, prm)
    log_x, log_xc = _log_sigmoid_pair(z)
    return reg_inc_beta_log_pair(log_x, log_xc, prm.nu, prm.tau)


def cdf(y, prm: GbiiParams):
    """Cumulative distribution function."""
    return _cdf_sf(y, prm)[0]


def sf(y, prm: GbiiParams):
    """Survival function 1 - F(y), accurate deep in the right tail."""
    return _cdf_sf(y, prm)[1]


def _from_log_beta(log_w, log_wc, prm: GbiiParams):
    """Map a beta variate, given as (log w, log(1 - w)), to y = mu (w/(1-w))^(1/p).

    Quantiles beyond the float range come back as inf without a warning; this
    happens only for vanishing second shapes, where the tail is that heavy.
    """
    with np.errstate(over="ignore"):
        return prm.mu * np.exp((log_w - log_wc) / prm.p)


def _check_q(q):
    arr = np.asarray(q, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise DomainError("probability must lie in (0, 1)")


def quantile(q, prm: GbiiParams):
    """Quantile function F^{-1}(q)."""
    _check_q(q)
    log_w, log_wc = inv_reg_inc_beta_log_pair(q, prm.nu, prm.tau)
    out = _from_log_beta(log_w, log_wc, prm)
    return float(out) if np.ndim(out) == 0 else out


def isf(s, prm: GbiiParams):
    """Inverse survival function: the y with 1 - F(y) = s."""
    _check_q(s)
    log_wc, log_w = inv_reg_inc_beta_log_pair(s, prm.tau, prm.nu)
    out = _from_log_beta(log_w, log_wc, prm)
    return float(out) if np.ndim(out) == 0 else out


def mode(prm: GbiiParams) -> float:
    """Mode mu ((p nu - 1)/(p tau + 1))^(1/p), or 0 when p nu <= 1."""
    a = prm.p * prm.nu - 1.0
    if a <= 0:
        return 0.0
    return prm.mu * math.exp((math.log(a) - math.log1p(prm.p * prm.tau)) / prm.p)


def _check_existence(h: float, prm: GbiiParams):
    lo = -prm.p * prm.nu
    hi = prm.p * prm.tau
    if not (lo + EXISTENCE_SLACK < h < hi - EXISTENCE_SLACK):
        raise ExistenceError(f"moment of order {h} requires {lo:.6g} < h < {hi:.6g}")


def moment(h: float, prm: GbiiParams) -> float:
    """E[Y^h] = mu^h B(nu + h/p, tau - h/p) / B(nu, tau)."""
    _check_existence(h, prm)
    if h == 0:
        return 1.0
    hp = h / prm.p
    return math.exp(h * math.log(prm.mu) + log_beta(prm.nu + hp, prm.tau - hp) - log_beta(prm.nu, prm.tau))


def incomplete_moment(h: float, s: float, side: str, prm: GbiiParams) -> float:
    """Conditional moment E[Y^h | Y <= s] (side='below') or E[Y^h | Y > s] ('above').

    Both follow from the fact that y^h f(y) is proportional to a GBII density
    with shapes (nu + h/p, tau - h/p).
    """
    if side not in ("below", "above"):
        raise DomainError(f"side must be 'below' or 'above', got {side!r}")
    if not s > 0:
        raise DomainError("incomplete_moment requires s > 0")
    full = moment(h, prm)
    hp = h / prm.p
    log_x, log_xc = _log_sigmoid_pair(float(_z(s, prm)))
    num_lo, num_hi = reg_inc_beta_log_pair(log_x, log_xc, prm.nu + hp, prm.tau - hp)
    den_lo, den_hi = reg_inc_beta_log_pair(log_x, log_xc, prm.nu, prm.tau)
    if side == "below":
        return full * num_lo / den_lo
    return full * num_hi / den_hi


# ---------------------------------------------------------------------------
# nested subfamilies
# ---------------------------------------------------------------------------

# name -> (free slot names, builder from free kwargs to (p, mu, nu, tau), fixed slots)
SUBFAMILIES = {
    "GBII": (("p", "mu", "nu", "tau"), lambda p, mu, nu, tau: (p, mu, nu, tau), frozenset()),
    "BII": (("mu", "nu", "tau"), lambda mu, nu, tau: (1.0, mu, nu, tau), frozenset({"p"})),
    "Burr": (("p", "mu", "tau"), lambda p, mu, tau: (p, mu, 1.0, tau), frozenset({"nu"})),
    "InverseBurr": (("p", "mu", "nu"), lambda p, mu, nu: (p, mu, nu, 1.0), frozenset({"tau"})),
    "GLMGA": (("p", "mu", "nu"), lambda p, mu, nu: (p, mu, nu, 0.5), frozenset({"tau"})),
    "InverseGLMGA": (("p", "mu", "tau"), lambda p, mu, tau: (p, mu, 0.5, tau), frozenset({"nu"})),
    "Paralogistic": (("p", "mu"), lambda p, mu: (p, mu, 1.0, p), frozenset({"nu", "tau"})),
    "InverseParalogistic": (("p", "mu"), lambda p, mu: (p, mu, p, 1.0), frozenset({"nu", "tau"})),
}


def subfamily(name: str, **free) -> GbiiParams:
    """Build a nested subfamily member, e.g. ``subfamily("Burr", p=2, mu=1, tau=3)``.

    Slots that the subfamily pins (or ties to ``p``) are recorded in
    ``GbiiParams.fixed`` so estimators leave them alone.
    """
    try:
        slots, build, fixed = SUBFAMILIES[name]
    except KeyError:
        raise DomainError(f"unknown GBII subfamily {name!r}; choose from {sorted(SUBFAMILIES)}") from None
    if set(free) != set(slots):
        raise DomainError(f"{name} takes parameters {slots}, got {tuple(sorted(free))}")
    p, mu, nu, tau = build(**free)
    return GbiiParams(p, mu, nu, tau, fixed)
