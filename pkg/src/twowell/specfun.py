"""Complex error function and its scaled complement.

Two regimes are combined:

* a Maclaurin series of erf evaluated in double-double arithmetic for
  moderate |z|, so that the cancellation between terms (up to about
  e^{|z|^2}) does not eat into the 53-bit result;
* the Laplace continued fraction for erfcx(z) = e^{z^2} erfc(z) in the
  right half-plane for large |z|, with reflection to reach Re z < 0.

All public functions accept scalars or arrays and return complex128
values of the same shape.
"""
from __future__ import annotations

import numpy as np

from .errors import Overflow

# 2/sqrt(pi) as an unevaluated sum hi + lo
_TWO_RSQPI = (1.1283791670955126, 1.533545961316588e-17)
_RSQPI = 0.5641895835477563
_SPLITTER = 134217729.0  # 2**27 + 1

# regime boundaries, see _series_mask
_R_SERIES = 4.0
_R_AXIS = 7.0
_AXIS_SLOPE = 0.25
_R_ERF = 6.0
_EXP_GUARD = 700.0


# ---------------------------------------------------------------------------
# double-double primitives (elementwise on float arrays)


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    s, e = _quick_two_sum(s, e + t)
    return _quick_two_sum(s, e + f)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + (ah * bl + al * bh))


def _dd_div_scalar(ah, al, b):
    q1 = ah / b
    p1, p2 = _two_prod(q1, b)
    s, e = _two_sum(ah, -p1)
    q2 = (s + (e - p2 + al)) / b
    return _quick_two_sum(q1, q2)


class _DDComplex:
    """Complex number with double-double real and imaginary parts."""

    __slots__ = ("rh", "rl", "ih", "il")

    def __init__(self, rh, rl, ih, il):
        self.rh, self.rl, self.ih, self.il = rh, rl, ih, il

    def __add__(self, o):
        rh, rl = _dd_add(self.rh, self.rl, o.rh, o.rl)
        ih, il = _dd_add(self.ih, self.il, o.ih, o.il)
        return _DDComplex(rh, rl, ih, il)

    def __mul__(self, o):
        ac = _dd_mul(self.rh, self.rl, o.rh, o.rl)
        bd = _dd_mul(self.ih, self.il, o.ih, o.il)
        ad = _dd_mul(self.rh, self.rl, o.ih, o.il)
        bc = _dd_mul(self.ih, self.il, o.rh, o.rl)
        rh, rl = _dd_add(ac[0], ac[1], -bd[0], -bd[1])
        ih, il = _dd_add(ad[0], ad[1], bc[0], bc[1])
        return _DDComplex(rh, rl, ih, il)

    def scale(self, hi, lo):
        rh, rl = _dd_mul(self.rh, self.rl, hi, lo)
        ih, il = _dd_mul(self.ih, self.il, hi, lo)
        return _DDComplex(rh, rl, ih, il)

    def div(self, d):
        rh, rl = _dd_div_scalar(self.rh, self.rl, d)
        ih, il = _dd_div_scalar(self.ih, self.il, d)
        return _DDComplex(rh, rl, ih, il)

    def neg(self):
        return _DDComplex(-self.rh, -self.rl, -self.ih, -self.il)

    def to_complex(self):
        return (self.rh + self.rl) + 1j * (self.ih + self.il)


# ---------------------------------------------------------------------------
# the two evaluation regimes


def _erf_series_dd(z):
    """erf(z) as a _DDComplex via the Maclaurin series."""
    x, y = z.real.copy(), z.imag.copy()
    zero = np.zeros_like(x)
    # w = -z^2 exactly to double-double
    x2 = _two_prod(x, x)
    y2 = _two_prod(y, y)
    re = _dd_add(y2[0], y2[1], -x2[0], -x2[1])
    xy = _two_prod(x, y)
    w = _DDComplex(re[0], re[1], -2 * xy[0], -2 * xy[1])

    term = _DDComplex(x, zero.copy(), y, zero.copy())
    total = _DDComplex(x.copy(), zero.copy(), y.copy(), zero.copy())
    n = 0
    while True:
        n += 1
        term = (term * w).div(float(n))
        contrib = term.div(float(2 * n + 1))
        total = total + contrib
        small = np.hypot(contrib.rh, contrib.ih) <= 1e-34 * np.maximum(
            np.hypot(total.rh, total.ih), 1e-300)
        if (n > 4 and np.all(small)) or n > 800:
            break
    return total.scale(*_TWO_RSQPI)


def _erfcx_series(z):
    """erfcx via the double-double series; accurate for |z| up to about 7."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    erf = _erf_series_dd(z)
    one_minus = erf.neg()
    rh, rl = _dd_add(np.ones_like(one_minus.rh), np.zeros_like(one_minus.rh),
                     one_minus.rh, one_minus.rl)
    comp = (rh + rl) + 1j * (one_minus.ih + one_minus.il)
    # e^{z^2} with the square carried to double-double
    x, y = z.real, z.imag
    x2 = _two_prod(x, x)
    y2 = _two_prod(y, y)
    re_hi, re_lo = _dd_add(x2[0], x2[1], -y2[0], -y2[1])
    im_hi, im_lo = _two_prod(x, y)
    im_hi, im_lo = 2 * im_hi, 2 * im_lo
    ez2 = np.exp(re_hi) * (1 + re_lo) * np.exp(1j * im_hi) * (1 + 1j * im_lo)
    return ez2 * comp


def _erfcx_fraction(z, tol=1e-16, max_terms=20000):
    """erfcx(z) for Re z > 0 from the Laplace continued fraction.

    erfcx(z) = (1/sqrt(pi)) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    evaluated with the modified Lentz algorithm.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    f = z.copy()
    c = z.copy()
    d = np.zeros_like(z)
    active = np.arange(z.size)
    tiny = 1e-300
    for n in range(1, max_terms):
        if active.size == 0:
            break
        an = 0.5 * n
        za = z.flat[active]
        dd = za + an * d[active]
        dd[dd == 0] = tiny
        dd = 1.0 / dd
        cc = za + an / c[active]
        cc[cc == 0] = tiny
        delta = cc * dd
        d[active] = dd
        c[active] = cc
        f.flat[active] *= delta
        active = active[np.abs(delta - 1) >= tol]
    return _RSQPI / f


def _series_mask(z):
    r = np.abs(z)
    return (r <= _R_SERIES) | ((r < _R_AXIS) & (np.abs(z.real) < _AXIS_SLOPE * r))


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite argument to complex error function")


# ---------------------------------------------------------------------------
# public API


def erfc_scaled(z):
    """Return erfcx(z) = exp(z**2) * (1 - erf(z)).

    Intended for Re z >= 0; negative real parts are reached through
    erfcx(z) = 2 exp(z**2) - erfcx(-z) and raise Overflow when that
    exponential is not representable.
    """
    scalar = np.isscalar(z) or np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_finite(z)
    out = np.empty_like(z)
    ser = _series_mask(z)
    if ser.any():
        out[ser] = _erfcx_series(z[ser])
    rest = ~ser
    right = rest & (z.real >= 0)
    left = rest & (z.real < 0)
    if right.any():
        out[right] = _erfcx_fraction(z[right])
    if left.any():
        zl = z[left]
        z2 = zl * zl
        if np.any(z2.real > _EXP_GUARD):
            raise Overflow("erfc_scaled: exp(z^2) overflows for Re z < 0")
        out[left] = 2 * np.exp(z2) - _erfcx_fraction(-zl)
    return out[0] if scalar else out


def erf_complex(z):
    """Complex error function erf(z) = 2/sqrt(pi) * int_0^z exp(-s^2) ds."""
    scalar = np.isscalar(z) or np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_finite(z)
    z2 = z * z
    if np.any(np.abs(z2.real) >= _EXP_GUARD):
        raise Overflow("erf_complex: |Re z^2| beyond guard")
    out = np.empty_like(z)
    ser = np.abs(z) <= _R_ERF
    if ser.any():
        out[ser] = _erf_series_dd(z[ser]).to_complex()
    rest = ~ser
    if rest.any():
        zr = z[rest]
        sgn = np.where(zr.real >= 0, 1.0, -1.0)
        za = sgn * zr
        out[rest] = sgn * (1 - np.exp(-za * za) * _erfcx_fraction(za))
    return out[0] if scalar else out


def sqrt_principal(z):
    """Principal square root, argument in (-pi/2, pi/2]."""
    return np.sqrt(np.asarray(z, dtype=complex))
