"""Special functions: log-beta, incomplete beta and its inverse, digamma, 3F2.

Every routine accepts scalars or numpy arrays.  Scalars take a pure-Python
path (fast for the handful of evaluations done per likelihood call); arrays
take a vectorised numpy path.  Products of powers are carried in log space so
that shape parameters in the thousands or millions stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, polygamma, zeta

from .errors import ConvergenceError, DomainError

__all__ = [
    "SeriesControl",
    "DEFAULT_SERIES",
    "log_beta",
    "reg_inc_beta",
    "reg_inc_beta_pair",
    "reg_inc_beta_log_pair",
    "inv_reg_inc_beta",
    "inv_reg_inc_beta_pair",
    "inv_reg_inc_beta_log_pair",
    "digamma",
    "reg_hyp_3f2",
    "inc_beta_da",
    "inc_beta_db",
    "beta_logpdf",
]

_TINY = 1e-300
_CF_EPS = 1e-15
_CF_MAX_ITER = 20_000
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_MIN = 15.0
# a series whose largest term exceeds its sum by this factor has lost ~4 digits
_CANCEL_LIMIT = 1e4
_LOG_MAX_FLOAT = math.log(np.finfo(float).max)
# roots below exp(_LOG_X_FLOOR) are resolved on the log scale by the power law
_LOG_X_FLOOR = -600.0
# relative size below which a series correction is lost in rounding (about 1e-17)
_LOG_EXACT_CORRECTION = -39.0
# below this second shape the lower tail is rebuilt from an O(b) expansion
_SMALL_B = 1e-3
_EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for hypergeometric series."""

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_terms < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def _is_scalar(*args) -> bool:
    return all(np.ndim(a) == 0 for a in args)


# ---------------------------------------------------------------------------
# log-gamma differences and log-beta
# ---------------------------------------------------------------------------


def _stirling_corr(x):
    """lgamma(x) minus its Stirling approximation, valid for x >= 15."""
    x2 = 1.0 / (x * x)
    return (1.0 / 12.0 - x2 * (1.0 / 360.0 - x2 * (1.0 / 1260.0 - x2 * (1.0 / 1680.0 - x2 / 1188.0)))) / x


def _log_beta_scalar(a: float, b: float) -> float:
    small, large = (a, b) if a <= b else (b, a)
    if large < _STIRLING_MIN:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    s = a + b
    if small < _STIRLING_MIN:
        # lgamma(large) - lgamma(large + small) without cancellation
        diff = (
            -(large - 0.5) * math.log1p(small / large)
            - small * math.log(s)
            + small
            + _stirling_corr(large)
            - _stirling_corr(s)
        )
        return math.lgamma(small) + diff
    return (
        _HALF_LOG_2PI
        - (a - 0.5) * math.log1p(b / a)
        - (b - 0.5) * math.log1p(a / b)
        - 0.5 * math.log(s)
        + _stirling_corr(a)
        + _stirling_corr(b)
        - _stirling_corr(s)
    )


def _log_beta_array(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    small = np.minimum(a, b)
    large = np.maximum(a, b)
    s = a + b
    out = gammaln(a) + gammaln(b) - gammaln(s)
    with np.errstate(all="ignore"):
        one_big = (large >= _STIRLING_MIN) & (small < _STIRLING_MIN)
        if np.any(one_big):
            sm, lg, ss = small[one_big], large[one_big], s[one_big]
            out[one_big] = gammaln(sm) + (
                -(lg - 0.5) * np.log1p(sm / lg)
                - sm * np.log(ss)
                + sm
                + _stirling_corr(lg)
                - _stirling_corr(ss)
            )
        both_big = small >= _STIRLING_MIN
        if np.any(both_big):
            aa, bb, ss = a[both_big], b[both_big], s[both_big]
            out[both_big] = (
                _HALF_LOG_2PI
                - (aa - 0.5) * np.log1p(bb / aa)
                - (bb - 0.5) * np.log1p(aa / bb)
                - 0.5 * np.log(ss)
                + _stirling_corr(aa)
                + _stirling_corr(bb)
                - _stirling_corr(ss)
            )
    return out


def log_beta(a, b):
    """Natural log of the beta function B(a, b) for a, b > 0."""
    if _is_scalar(a, b):
        a, b = float(a), float(b)
        if not (a > 0 and b > 0):
            raise DomainError(f"log_beta requires a, b > 0 (got a={a}, b={b})")
        return _log_beta_scalar(a, b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(a > 0) and np.all(b > 0)):
        raise DomainError("log_beta requires a, b > 0")
    return _log_beta_array(a, b)


# ---------------------------------------------------------------------------
# digamma
# ---------------------------------------------------------------------------


def _digamma_asym(x):
    inv = 1.0 / x
    inv2 = inv * inv
    tail = inv2 * (
        1.0 / 12.0
        - inv2
        * (
            1.0 / 120.0
            - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))
        )
    )
    return np.log(x) - 0.5 * inv - tail


def digamma(x):
    """Digamma function psi(x) for x > 0."""
    if np.ndim(x) == 0:
        x = float(x)
        if not x > 0:
            raise DomainError(f"digamma requires x > 0, got {x}")
        acc = 0.0
        while x < 10.0:
            acc -= 1.0 / x
            x += 1.0
        inv = 1.0 / x
        inv2 = inv * inv
        tail = inv2 * (
            1.0 / 12.0
            - inv2
            * (
                1.0 / 120.0
                - inv2
                * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))
            )
        )
        return acc + math.log(x) - 0.5 * inv - tail
    x = np.array(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError("digamma requires x > 0")
    acc = np.zeros_like(x)
    low = x < 10.0
    while np.any(low):
        acc[low] -= 1.0 / x[low]
        x[low] += 1.0
        low = x < 10.0
    return acc + _digamma_asym(x)


# ---------------------------------------------------------------------------
# regularized incomplete beta
# ---------------------------------------------------------------------------


def _betacf_scalar(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a,b) (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betacf_array(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    result = np.full_like(x, np.nan)
    live = np.ones(x.shape, dtype=bool)
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        newly = live & (np.abs(delta - 1.0) < _CF_EPS)
        if np.any(newly):
            result[newly] = h[newly]
            live &= ~newly
            if not np.any(live):
                return result
            # shrink the working set once a good share has converged
            if live.sum() * 2 < live.size:
                idx = np.flatnonzero(live)
                sub = _betacf_continue(a[idx], b[idx], x[idx], c[idx], d[idx], h[idx], m)
                result[idx] = sub
                return result
    raise ConvergenceError("incomplete beta continued fraction did not converge")


def _betacf_continue(a, b, x, c, d, h, m_done):
    """Resume the Lentz iteration from step m_done for a subset."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    result = np.full_like(x, np.nan)
    live = np.ones(x.shape, dtype=bool)
    for m in range(m_done + 1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        newly = live & (np.abs(delta - 1.0) < _CF_EPS)
        if np.any(newly):
            result[newly] = h[newly]
            live &= ~newly
            if not np.any(live):
                return result
            if live.sum() * 2 < live.size:
                idx = np.flatnonzero(live)
                result[idx] = _betacf_continue(a[idx], b[idx], x[idx], c[idx], d[idx], h[idx], m)
                return result
    raise ConvergenceError("incomplete beta continued fraction did not converge")


def _log_pair_scalar(x: float, xc: float) -> tuple[float, float]:
    """(log x, log xc), taking the larger one's log from the smaller value.

    With shapes in the millions, b log(xc) amplifies the rounding of
    xc = 1 - x; log1p(-x) keeps the full precision of the small value.
    """
    if x <= 0.5:
        return math.log(x), math.log1p(-x)
    return math.log1p(-xc), math.log(xc)


def _small_b_applies(a: float, b: float) -> bool:
    return b <= _SMALL_B and b <= 1e-4 * a


def _log_b_beta_small(a: float, b: float) -> float:
    """log(b B(a, b)) for b small against both 1 and a.

    Both log Gamma(1 + b) and log Gamma(a + b) - log Gamma(a) are O(b), so
    each is expanded in powers of b instead of differencing O(1) values.
    """
    lg1p = -_EULER_GAMMA * b
    bk = -b
    for k in range(2, 9):
        bk *= -b
        lg1p += float(zeta(k)) * bk / k
    shift = 0.0
    bk = 1.0
    fact = 1.0
    for n in range(0, 5):
        bk *= b
        fact *= n + 1
        shift += float(polygamma(n, a)) * bk / fact
    return lg1p - shift


def _lower_small_b(x: float, xc: float, a: float, b: float) -> float:
    """I_x(a, b) when b is tiny and the complement I_xc(b, a) is close to one.

    Uses I_xc(b, a) = xc^b / (b B(a, b)) * (1 + b T) with
    T = sum_k (1 - a)_k xc^k / (k! (b + k)); every piece of log I_xc(b, a)
    is O(b), so the lower tail -expm1(log I_xc) keeps full relative accuracy.
    """
    term = 1.0
    tsum = 0.0
    k = 0
    while True:
        k += 1
        term *= (k - a) / k * xc
        contrib = term / (b + k)
        tsum += contrib
        if abs(contrib) <= 1e-17 * max(abs(tsum), 1e-300) or k > 2000:
            break
    _, log_xc = _log_pair_scalar(x, xc)
    log_upper = b * log_xc - _log_b_beta_small(a, b) + math.log1p(b * tsum)
    return -math.expm1(log_upper)


def _inc_beta_scalar(x: float, xc: float, a: float, b: float) -> tuple[float, float]:
    if x <= 0.0:
        return 0.0, 1.0
    if xc <= 0.0:
        return 1.0, 0.0
    log_x, log_xc = _log_pair_scalar(x, xc)
    log_front = a * log_x + b * log_xc - _log_beta_scalar(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        lower = math.exp(log_front) * _betacf_scalar(a, b, x) / a
        return lower, 1.0 - lower
    upper = math.exp(log_front) * _betacf_scalar(b, a, xc) / b
    if upper > 0.5 and _small_b_applies(a, b):
        lower = _lower_small_b(x, xc, a, b)
        return lower, 1.0 - lower
    return 1.0 - upper, upper


def _inc_beta_array(x, xc, a, b):
    x, xc, a, b = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(xc, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    lower = np.zeros(x.shape)
    upper = np.ones(x.shape)
    at_one = xc <= 0.0
    lower[at_one] = 1.0
    upper[at_one] = 0.0
    inner = (x > 0.0) & ~at_one
    if not np.any(inner):
        return lower, upper
    xi, xci, ai, bi = x[inner], xc[inner], a[inner], b[inner]
    small_x = xi <= 0.5
    with np.errstate(divide="ignore"):
        log_x = np.where(small_x, np.log(xi), np.log1p(-xci))
        log_xc = np.where(small_x, np.log1p(-xi), np.log(xci))
    log_front = ai * log_x + bi * log_xc - _log_beta_array(ai, bi)
    front = np.exp(log_front)
    direct = xi < (ai + 1.0) / (ai + bi + 2.0)
    lo = np.empty(xi.shape)
    up = np.empty(xi.shape)
    if np.any(direct):
        v = front[direct] * _betacf_array(ai[direct], bi[direct], xi[direct]) / ai[direct]
        lo[direct] = v
        up[direct] = 1.0 - v
    flip = ~direct
    if np.any(flip):
        v = front[flip] * _betacf_array(bi[flip], ai[flip], xci[flip]) / bi[flip]
        up[flip] = v
        lo[flip] = 1.0 - v
        idx = np.flatnonzero(flip)
        for j in idx[(v > 0.5) & (bi[flip] <= _SMALL_B) & (bi[flip] <= 1e-4 * ai[flip])]:
            lo[j] = _lower_small_b(float(xi[j]), float(xci[j]), float(ai[j]), float(bi[j]))
            up[j] = 1.0 - lo[j]
    lower[inner] = lo
    upper[inner] = up
    return lower, upper


def _inc_beta(x, xc, a, b):
    if _is_scalar(x, xc, a, b):
        return _inc_beta_scalar(float(x), float(xc), float(a), float(b))
    return _inc_beta_array(x, xc, a, b)


def _check_beta_args(x, a, b):
    if _is_scalar(x, a, b):
        ok = 0.0 <= x <= 1.0 and a > 0 and b > 0
    else:
        ok = bool(np.all((np.asarray(x) >= 0) & (np.asarray(x) <= 1)) and np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0))
    if not ok:
        raise DomainError("reg_inc_beta requires 0 <= x <= 1 and a, b > 0")


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta I_x(a, b)."""
    _check_beta_args(x, a, b)
    if _is_scalar(x, a, b):
        return _inc_beta_scalar(float(x), 1.0 - float(x), float(a), float(b))[0]
    x = np.asarray(x, dtype=float)
    return _inc_beta_array(x, 1.0 - x, a, b)[0]


def reg_inc_beta_pair(x, xc, a, b):
    """Return (I_x(a,b), 1 - I_x(a,b)) with xc = 1 - x supplied exactly.

    Passing the complement separately keeps full relative precision in
    whichever tail is small.
    """
    _check_beta_args(x, a, b)
    return _inc_beta(x, xc, a, b)


def reg_inc_beta_log_pair(log_x, log_xc, a, b):
    """:func:`reg_inc_beta_pair` with the argument given as (log x, log(1 - x)).

    When x (or 1 - x) is below exp(-600) the tail is the leading power-law
    term x^a / (a B(a, b)), whose relative error is O(x); this keeps the
    result exact even when x itself underflows, e.g. for a shape near zero.
    """
    scalar = _is_scalar(log_x, log_xc, a, b)
    lx, lxc, a_arr, b_arr = (np.atleast_1d(np.asarray(v, dtype=float)) for v in np.broadcast_arrays(log_x, log_xc, a, b))
    if not (np.all(a_arr > 0) and np.all(b_arr > 0)):
        raise DomainError("reg_inc_beta requires a, b > 0")
    tiny_x = lx < _LOG_X_FLOOR
    tiny_xc = lxc < _LOG_X_FLOOR
    regular = ~(tiny_x | tiny_xc)
    lower = np.empty(lx.shape)
    upper = np.empty(lx.shape)
    if np.any(regular):
        lo, up = _inc_beta_array(np.exp(lx[regular]), np.exp(lxc[regular]), a_arr[regular], b_arr[regular])
        lower[regular] = lo
        upper[regular] = up
    if np.any(tiny_x):
        ai, bi = a_arr[tiny_x], b_arr[tiny_x]
        lower[tiny_x] = np.exp(ai * lx[tiny_x] - np.log(ai) - _log_beta_array(ai, bi))
        upper[tiny_x] = 1.0 - lower[tiny_x]
    if np.any(tiny_xc):
        ai, bi = a_arr[tiny_xc], b_arr[tiny_xc]
        upper[tiny_xc] = np.exp(bi * lxc[tiny_xc] - np.log(bi) - _log_beta_array(ai, bi))
        lower[tiny_xc] = 1.0 - upper[tiny_xc]
    if scalar:
        return float(lower[0]), float(upper[0])
    return lower, upper


def beta_logpdf(x, a, b, xc=None):
    """Log density of the Beta(a, b) distribution at x in (0, 1).

    Pass ``xc = 1 - x`` to keep the density exact when x rounds to one.
    """
    if _is_scalar(x, a, b) and (xc is None or np.ndim(xc) == 0):
        log_xc = math.log1p(-x) if xc is None else math.log(xc)
        return (a - 1.0) * math.log(x) + (b - 1.0) * log_xc - _log_beta_scalar(float(a), float(b))
    x = np.asarray(x, dtype=float)
    log_xc = np.log1p(-x) if xc is None else np.log(np.asarray(xc, dtype=float))
    return (a - 1.0) * np.log(x) + (b - 1.0) * log_xc - _log_beta_array(a, b)


# ---------------------------------------------------------------------------
# inverse of the regularized incomplete beta
# ---------------------------------------------------------------------------


def _initial_guess(p, a, b):
    """Starting point for I_x(a,b) = p (Numerical Recipes, invbetai)."""
    p, a, b = np.broadcast_arrays(np.asarray(p, float), np.asarray(a, float), np.asarray(b, float))
    with np.errstate(all="ignore"):
        pp = np.where(p < 0.5, p, 1.0 - p)
        t = np.sqrt(-2.0 * np.log(pp))
        z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        z = np.where(p < 0.5, z, -z)
        al = (z * z - 3.0) / 6.0
        h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0))
        w = z * np.sqrt(al + h) / h - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h))
        x_big = a / (a + b * np.exp(2.0 * w))
        lb = _log_beta_array(a, b)
        # small-x / near-one power approximations
        lna = np.log(a / (a + b))
        lnb = np.log(b / (a + b))
        tt = np.exp(a * lna) / a
        uu = np.exp(b * lnb) / b
        ww = tt + uu
        x_small = np.where(
            p < tt / ww,
            np.exp((np.log(a * ww * p)) / a),
            1.0 - np.exp(np.log(b * ww * (1.0 - p)) / b),
        )
        # pure power law I ~ x^a / (a B) for very small p
        x_pow = np.exp((np.log(p) + np.log(a) + lb) / a)
    x = np.where((a >= 1.0) & (b >= 1.0), x_big, x_small)
    x = np.where(np.isfinite(x) & (x > 0) & (x < 1), x, np.where(np.isfinite(x_pow) & (x_pow < 1), x_pow, 0.5))
    return np.clip(x, 1e-300, 1.0 - 1e-16)


def _log_power_root(p, a, b, lb=None):
    """log x from the leading term I_x(a, b) ~ x^a / (a B(a, b)).

    The next term is relatively O(x), so below exp(_LOG_X_FLOOR) it is exact
    in double precision even though x itself may underflow.
    """
    if lb is None:
        lb = _log_beta_array(a, b)
    with np.errstate(divide="ignore"):
        return (np.log(p) + np.log(a) + lb) / a


def _inv_lower(p, a, b):
    """Solve I_x(a,b) = p for x when the root lies in (0, 1/2]; vectorised and safeguarded."""
    p, a, b = np.broadcast_arrays(np.asarray(p, float), np.asarray(a, float), np.asarray(b, float))
    p = p.astype(float).copy()
    x = _initial_guess(p, a, b).astype(float)
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    done = p <= 0.0
    x[done] = 0.0
    lb = _log_beta_array(a, b)
    log_pow = _log_power_root(p, a, b, lb)
    # I = x^a / (a B) * (1 + a (1 - b) x / (a + 1) + ...); once the first
    # correction is below rounding the power law is the root to full precision,
    # and it is monotone in p where Newton would only add ulp-level noise.
    # Below exp(_LOG_X_FLOOR) Newton would also stall on (sub)normal roots.
    with np.errstate(divide="ignore"):
        log_corr = log_pow + np.log(np.abs(1.0 - b) * a / (a + 1.0))
    vanishing = ~done & ((log_pow < _LOG_X_FLOOR) | (log_corr < _LOG_EXACT_CORRECTION))
    x[vanishing] = np.exp(log_pow[vanishing])
    done |= vanishing
    for _ in range(200):
        live = ~done
        if not np.any(live):
            return x
        xl, pl, al, bl = x[live], p[live], a[live], b[live]
        f = _inc_beta_array(xl, 1.0 - xl, al, bl)[0] - pl
        lo_l = np.where(f < 0, xl, lo[live])
        hi_l = np.where(f > 0, xl, hi[live])
        with np.errstate(all="ignore"):
            logpdf = (al - 1.0) * np.log(xl) + (bl - 1.0) * np.log1p(-xl) - lb[live]
            step = f / np.exp(logpdf)
            xn = xl - step
        bad = ~np.isfinite(xn) | (xn <= lo_l) | (xn >= hi_l)
        geo = (lo_l > 0) & (hi_l > 4.0 * lo_l)
        mid = np.where(lo_l <= 0, hi_l / 16.0, np.where(geo, np.sqrt(lo_l * hi_l), 0.5 * (lo_l + hi_l)))
        xn = np.where(bad, mid, xn)
        converged = (f == 0) | (~bad & (np.abs(xn - xl) <= 2e-16 * xl)) | (hi_l - lo_l <= 4e-16 * hi_l)
        x[live] = np.where(converged & (f == 0), xl, xn)
        lo[live] = lo_l
        hi[live] = hi_l
        idx = np.flatnonzero(live)
        done[idx[converged]] = True
    if not np.all(done):
        raise ConvergenceError("inverse incomplete beta iteration stalled; pathological shape parameters")
    return x


def inv_reg_inc_beta_pair(q, a, b):
    """Return (x, 1 - x) with I_x(a, b) = q, each accurate in relative terms."""
    scalar = _is_scalar(q, a, b)
    q_arr, a_arr, b_arr = np.broadcast_arrays(np.asarray(q, float), np.asarray(a, float), np.asarray(b, float))
    if not (np.all((q_arr > 0) & (q_arr < 1)) and np.all(a_arr > 0) and np.all(b_arr > 0)):
        raise DomainError("inv_reg_inc_beta requires 0 < q < 1 and a, b > 0")
    # solve for whichever of x, 1 - x is below one half so it keeps full relative precision
    low = q_arr <= _inc_beta_array(np.full(q_arr.shape, 0.5), np.full(q_arr.shape, 0.5), a_arr, b_arr)[0]
    x = np.empty(q_arr.shape)
    xc = np.empty(q_arr.shape)
    if np.any(low):
        v = _inv_lower(q_arr[low], a_arr[low], b_arr[low])
        x[low] = v
        xc[low] = 1.0 - v
    high = ~low
    if np.any(high):
        v = _inv_lower(1.0 - q_arr[high], b_arr[high], a_arr[high])
        xc[high] = v
        x[high] = 1.0 - v
    if scalar:
        return float(x), float(xc)
    return x, xc


def inv_reg_inc_beta_log_pair(q, a, b):
    """Return (log x, log(1 - x)) with I_x(a, b) = q.

    Unlike :func:`inv_reg_inc_beta_pair` this stays exact when the root is
    too small to represent, as happens for a first (or second) shape near
    zero.
    """
    scalar = _is_scalar(q, a, b)
    x, xc = inv_reg_inc_beta_pair(q, a, b)
    q_arr, a_arr, b_arr = np.broadcast_arrays(np.asarray(q, float), np.asarray(a, float), np.asarray(b, float))
    x, xc = np.atleast_1d(x).astype(float), np.atleast_1d(xc).astype(float)
    q_arr, a_arr, b_arr = np.atleast_1d(q_arr), np.atleast_1d(a_arr), np.atleast_1d(b_arr)
    with np.errstate(divide="ignore"):
        small_x = x <= 0.5
        log_x = np.where(small_x, np.log(x), np.log1p(-xc))
        log_xc = np.where(small_x, np.log1p(-x), np.log(xc))
        tiny_x = x < math.exp(_LOG_X_FLOOR)
        tiny_xc = xc < math.exp(_LOG_X_FLOOR)
    if np.any(tiny_x):
        log_x[tiny_x] = _log_power_root(q_arr[tiny_x], a_arr[tiny_x], b_arr[tiny_x])
        log_xc[tiny_x] = -x[tiny_x]
    if np.any(tiny_xc):
        log_xc[tiny_xc] = _log_power_root(1.0 - q_arr[tiny_xc], b_arr[tiny_xc], a_arr[tiny_xc])
        log_x[tiny_xc] = -xc[tiny_xc]
    if scalar:
        return float(log_x[0]), float(log_xc[0])
    return log_x, log_xc


def inv_reg_inc_beta(q, a, b):
    """Inverse of the regularized incomplete beta in its first argument."""
    return inv_reg_inc_beta_pair(q, a, b)[0]


# ---------------------------------------------------------------------------
# hypergeometric 3F2 and parameter derivatives of I_x(a, b)
# ---------------------------------------------------------------------------


def _hyp3f2_sum(a1, a2, a3, b1, b2, z, control: SeriesControl) -> tuple[float, float]:
    """Unregularized 3F2 partial sum and the largest term magnitude seen.

    The second value lets callers detect cancellation when terms alternate.
    """
    total = 1.0
    term = 1.0
    biggest = 1.0
    if z == 0.0:
        return total, biggest
    for k in range(control.max_terms):
        term *= (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (k + 1.0)) * z
        total += term
        biggest = max(biggest, abs(term))
        if term == 0.0:
            return total, biggest
        if abs(term) / (1.0 - z) <= control.rel_tol * abs(total):
            return total, biggest
    raise ConvergenceError(
        f"3F2 series did not reach rel_tol={control.rel_tol} in {control.max_terms} terms (z={z})"
    )


def reg_hyp_3f2(a1, a2, a3, b1, b2, z, control: SeriesControl = DEFAULT_SERIES) -> float:
    """Regularized generalized hypergeometric 3F2~(a1,a2,a3; b1,b2; z) for z in [0, 1)."""
    if not (0.0 <= z < 1.0):
        raise DomainError(f"reg_hyp_3f2 requires 0 <= z < 1, got {z}")
    if not (b1 > 0 and b2 > 0):
        raise DomainError("reg_hyp_3f2 requires b1, b2 > 0")
    s, _ = _hyp3f2_sum(float(a1), float(a2), float(a3), float(b1), float(b2), float(z), control)
    return s * math.exp(-math.lgamma(b1) - math.lgamma(b2))


def _da_series(x: float, a: float, b: float, lower: float, control: SeriesControl) -> float:
    if x >= 1.0:
        # the argument rounded to one (its complement is below machine precision)
        raise ConvergenceError("3F2 series diverges at z=1")
    if x > 0.5 and b != 1.0:
        # terms decay like x^k; skip straight to the fallback when the cap is hopeless
        needed = (math.log(control.rel_tol) + math.log1p(-x)) / math.log(x)
        if needed > control.max_terms:
            raise ConvergenceError(f"3F2 series needs about {needed:.0f} terms at z={x}")
    s, biggest = _hyp3f2_sum(a, a, 1.0 - b, a + 1.0, a + 1.0, x, control)
    if biggest > _CANCEL_LIMIT * abs(s):
        raise ConvergenceError("3F2 series lost precision to alternating terms")
    log_coef = a * math.log(x) - 2.0 * math.log(a) - _log_beta_scalar(a, b)
    if s != 0.0 and log_coef + math.log(abs(s)) > _LOG_MAX_FLOAT:
        # both shapes large: the series term dwarfs the result it must cancel down to
        raise ConvergenceError("3F2 derivative term overflows")
    first = lower * (math.log(x) - digamma(a) + digamma(a + b))
    second = math.copysign(math.exp(log_coef + math.log(abs(s))), s) if s != 0.0 else 0.0
    if abs(first - second) < abs(first) / _CANCEL_LIMIT:
        raise ConvergenceError("derivative terms cancel")
    return first - second


def _fd_shape(x: float, xc: float, a: float, b: float, which: int) -> float:
    """Central difference of I_x(a, b) in a (which=0) or b (which=1).

    Differences are taken on whichever tail is smaller to avoid cancellation.
    """
    shape = (a, b)[which]
    h = min(1e-6 * max(1.0, shape), 0.5 * shape)
    args_p = [a, b]
    args_m = [a, b]
    args_p[which] += h
    args_m[which] -= h
    lo_p, up_p = _inc_beta_scalar(x, xc, *args_p)
    lo_m, up_m = _inc_beta_scalar(x, xc, *args_m)
    if lo_p + lo_m <= up_p + up_m:
        return (lo_p - lo_m) / (2.0 * h)
    return -(up_p - up_m) / (2.0 * h)


def inc_beta_da(x: float, a: float, b: float, control: SeriesControl = DEFAULT_SERIES, xc: float | None = None) -> float:
    """Partial derivative of I_x(a, b) with respect to a at fixed x.

    Uses the 3F2 representation.  When the series cannot deliver full
    precision (x close to 1, or alternating terms that cancel) it falls back
    to a central difference.  Pass ``xc = 1 - x`` when x rounds to one.
    """
    x, a, b = float(x), float(a), float(b)
    xc = 1.0 - x if xc is None else float(xc)
    if x <= 0.0 or xc <= 0.0:
        return 0.0
    lower, _ = _inc_beta_scalar(x, xc, a, b)
    try:
        return _da_series(x, a, b, lower, control)
    except ConvergenceError:
        return _fd_shape(x, xc, a, b, 0)


def inc_beta_db(x: float, a: float, b: float, control: SeriesControl = DEFAULT_SERIES, xc: float | None = None) -> float:
    """Partial derivative of I_x(a, b) with respect to b at fixed x.

    By reflection, d/db I_x(a,b) = -d/dc I_{1-x}(c, a) at c = b.
    """
    x, a, b = float(x), float(a), float(b)
    xc = 1.0 - x if xc is None else float(xc)
    if x <= 0.0 or xc <= 0.0:
        return 0.0
    _, upper = _inc_beta_scalar(x, xc, a, b)
    try:
        return -_da_series(xc, b, a, upper, control)
    except ConvergenceError:
        return _fd_shape(x, xc, a, b, 1)
