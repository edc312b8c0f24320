"""Modified Bessel function of the second kind, K_nu(x), for real order.

Temme's method: for x < 2 the fractional order mu = nu - round(nu) is
handled by Temme's series, for x >= 2 by Steed's continued fraction (CF2);
K_mu and K_{mu+1} are then carried up to K_nu by the stable forward
recurrence ``K_{v+1} = K_{v-1} + (2v/x) K_v``.

Two implementations are provided: a scalar numba kernel used inside the
covariance loops, and a vectorised numpy version used as the fallback.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = ["bessel_k", "bessel_k_array"]

# Taylor coefficients of 1/Gamma(1+z) at z=0.
_RGAMMA = np.array([
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
])

_EPS = 1e-16
_XMIN = 2.0
_MAXIT = 10000
# exp(-x) underflows to subnormals beyond this point
_XMAX = 705.0


def _gamma_terms(mu):
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    mu2 = mu * mu
    odd = 0.0
    for k in range(25, 0, -2):
        odd = odd * mu2 + _RGAMMA[k]
    even = 0.0
    for k in range(26, -1, -2):
        even = even * mu2 + _RGAMMA[k]
    return -odd, even, even + mu * odd, even - mu * odd


_gamma_terms_jit = njit(_gamma_terms)


@njit
def _bessel_k_scalar(nu, x):
    if x > _XMAX:
        return 0.0
    nl = int(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    if x < _XMIN:
        x2 = 0.5 * x
        pimu = math.pi * xmu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = xmu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _gamma_terms_jit(xmu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, _MAXIT + 1):
            ff = (i * ff + p + q) / (i * i - xmu2)
            c *= d / i
            p /= i - xmu
            q /= i + xmu
            dl = c * ff
            total += dl
            total1 += c * (p - i * ff)
            if abs(dl) < abs(total) * _EPS:
                break
        rkmu = total
        rk1 = total1 * xi2
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = d
        delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - xmu2
        q = a1
        c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(1, _MAXIT + 1):
            a -= 2 * i
            c = -a * c / (i + 1.0)
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < _EPS:
                break
        h = a1 * h
        rkmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi
    for i in range(1, nl + 1):
        rktemp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rktemp
    return rkmu


def _check_args(nu, x):
    if not nu >= 0.0:
        raise ValueError(f"bessel_k requires nu >= 0, got {nu}")
    if np.any(~(np.asarray(x) > 0.0)):
        raise ValueError("bessel_k requires x > 0")


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x).

    Parameters
    ----------
    nu : float
        Order, ``nu >= 0``.
    x : float
        Argument, ``x > 0``.

    Returns
    -------
    float
        ``K_nu(x)``; exactly 0 once ``x`` is past the double-precision
        underflow point of ``exp(-x)``.
    """
    nu = float(nu)
    x = float(x)
    _check_args(nu, x)
    if USE_NUMBA:
        return float(_bessel_k_scalar(nu, x))
    return float(bessel_k_array(nu, np.array([x]))[0])


def _temme_series(xmu, x):
    """Vectorised small-x branch: K_mu(x), K_{mu+1}(x)."""
    xmu2 = xmu * xmu
    x2 = 0.5 * x
    pimu = math.pi * xmu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = xmu * d
    with np.errstate(invalid="ignore", divide="ignore"):
        fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / e)
    gam1, gam2, gampl, gammi = _gamma_terms(xmu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    e = np.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    active = np.arange(x.size)
    for i in range(1, _MAXIT + 1):
        ff_a = (i * ff[active] + p[active] + q[active]) / (i * i - xmu2)
        c_a = c[active] * dd[active] / i
        p_a = p[active] / (i - xmu)
        q_a = q[active] / (i + xmu)
        dl = c_a * ff_a
        total[active] += dl
        total1[active] += c_a * (p_a - i * ff_a)
        ff[active], c[active], p[active], q[active] = ff_a, c_a, p_a, q_a
        active = active[np.abs(dl) >= np.abs(total[active]) * _EPS]
        if active.size == 0:
            break
    return total, total1 * 2.0 / x


def _steed_cf2(xmu, x):
    """Vectorised large-x branch: K_mu(x), K_{mu+1}(x)."""
    xmu2 = xmu * xmu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - xmu2
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    active = np.arange(x.size)
    for i in range(1, _MAXIT + 1):
        # a depends only on i, so it stays shared across elements
        a -= 2 * i
        c_a = -a * c[active] / (i + 1.0)
        qnew = (q1[active] - b[active] * q2[active]) / a
        q1[active] = q2[active]
        q2[active] = qnew
        q[active] += c_a * qnew
        c[active] = c_a
        b[active] += 2.0
        d_a = 1.0 / (b[active] + a * d[active])
        d[active] = d_a
        delh_a = (b[active] * d_a - 1.0) * delh[active]
        delh[active] = delh_a
        h[active] += delh_a
        dels = q[active] * delh_a
        s[active] += dels
        active = active[np.abs(dels / s[active]) >= _EPS]
        if active.size == 0:
            break
    h = a1 * h
    rkmu = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    rk1 = rkmu * (xmu + x + 0.5 - h) / x
    return rkmu, rk1


def bessel_k_array(nu, x):
    """Vectorised pure-numpy ``K_nu`` over an array of arguments.

    ``nu`` is a scalar shared by every element of ``x``.
    """
    nu = float(nu)
    x = np.asarray(x, dtype=float)
    _check_args(nu, x)
    shape = x.shape
    x = x.ravel()
    out = np.zeros_like(x)
    nl = int(nu + 0.5)
    xmu = nu - nl
    small = x < _XMIN
    large = (~small) & (x <= _XMAX)
    rkmu = np.zeros_like(x)
    rk1 = np.zeros_like(x)
    if small.any():
        rkmu[small], rk1[small] = _temme_series(xmu, x[small])
    if large.any():
        rkmu[large], rk1[large] = _steed_cf2(xmu, x[large])
    ok = small | large
    xi2 = 2.0 / x[ok]
    km, k1 = rkmu[ok], rk1[ok]
    for i in range(1, nl + 1):
        km, k1 = k1, (xmu + i) * xi2 * k1 + km
    out[ok] = km
    return out.reshape(shape)
