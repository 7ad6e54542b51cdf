"""Quadrature, truncated Taylor arithmetic and numerical Laplace inversion."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _spi
from scipy import special


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

class SemiInfiniteMap(enum.Enum):
    RATIONAL = "rational"   # x = a + c u / (1 - u), u in (0, 1)
    EXP = "exp"             # x = a + c exp(y), y in R


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    semi_infinite_map: SemiInfiniteMap = SemiInfiniteMap.RATIONAL
    # length scale of the semi-infinite map
    scale: float = 1.0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")

    def tightened(self, factor: float = 10.0) -> "QuadratureSpec":
        """Spec for an inner integral one nesting level down."""
        return QuadratureSpec(self.rel_tol / factor, self.abs_tol / factor,
                              self.max_subdivisions, self.semi_infinite_map,
                              self.scale)


DEFAULT_QUAD = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


def integrate(f: Callable, a: float, b: float,
              spec: QuadratureSpec = DEFAULT_QUAD):
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``.

    ``f`` may return an array; the whole array is integrated at once. ``b``
    may be ``+inf``, in which case the map selected by ``spec`` is applied.
    Endpoint singularities must be removed by the caller.
    """
    if b == math.inf:
        g, lo, hi = _semi_infinite(f, a, spec)
    elif math.isinf(a) or math.isinf(b):
        raise ValueError("only [a, +inf) semi-infinite ranges are supported")
    else:
        g, lo, hi = f, a, b
    res, err, info = _spi.quad_vec(
        g, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=spec.max_subdivisions, full_output=True)
    if not info.success:
        raise QuadratureError("adaptive quadrature did not converge", res, err)
    return res


def _semi_infinite(f, a, spec):
    c = spec.scale
    if spec.semi_infinite_map is SemiInfiniteMap.RATIONAL:
        def g(u):
            if u >= 1.0:
                return 0.0 * f(a + c)
            return f(a + c * u / (1.0 - u)) * (c / (1.0 - u) ** 2)
        return g, 0.0, 1.0

    def g(y):
        if y > 700.0:
            # exp overflows; the integrand must have decayed long before
            return 0.0 * f(a + c)
        e = c * math.exp(y)
        return f(a + e) * e
    return g, -math.inf, math.inf


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    """Nodes and weights of the n-point Gauss-Legendre rule on ``[a, b]``."""
    t, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


@lru_cache(maxsize=None)
def _tanh_sinh(n, t_max):
    t = np.linspace(-t_max, t_max, n)
    h = t[1] - t[0]
    arg = 0.5 * math.pi * np.sinh(t)
    # (1 + x)/2 and (1 - x)/2 computed directly to keep precision at the ends
    from_a = np.exp(arg) / np.cosh(arg) / 2.0
    to_b = np.exp(-arg) / np.cosh(arg) / 2.0
    w = h * 0.5 * math.pi * np.cosh(t) / np.cosh(arg) ** 2
    return from_a, to_b, w


def tanh_sinh(n: int = 81, a: float = 0.0, b: float = 1.0, t_max: float = 3.2):
    """Double-exponential rule on ``[a, b]`` for endpoint-singular integrands.

    Returns ``(nodes, distance_to_b, weights)``; the middle array avoids
    cancellation when the integrand is singular at ``b``.
    """
    from_a, to_b, w = _tanh_sinh(n, t_max)
    return a + (b - a) * from_a, (b - a) * to_b, 0.5 * (b - a) * w


# --------------------------------------------------------------------------
# truncated Taylor series
# --------------------------------------------------------------------------

class Jet:
    """Truncated Taylor expansion ``sum_k c_k (s - s0)**k`` of fixed order.

    ``coeffs`` has shape ``(order + 1, *batch)`` so a whole batch of
    expansions is carried through arithmetic at once.
    """

    __array_priority__ = 100

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs)
        if self.coeffs.ndim == 0:
            raise ValueError("a jet needs at least one coefficient")

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value)
        c = np.zeros((order + 1,) + value.shape, dtype=np.result_type(value, float))
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, s0, order):
        j = cls.constant(s0, order)
        if order >= 1:
            j.coeffs[1] = 1.0
        return j

    @classmethod
    def from_derivatives(cls, derivs):
        derivs = np.asarray(derivs)
        k = np.arange(derivs.shape[0]).reshape((-1,) + (1,) * (derivs.ndim - 1))
        return cls(derivs / special.factorial(k))

    def derivatives(self):
        k = np.arange(self.order + 1).reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return self.coeffs * special.factorial(k)

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other
        value = np.asarray(other)
        shape = np.broadcast_shapes(value.shape, self.coeffs.shape[1:])
        return Jet.constant(np.broadcast_to(value, shape), self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * np.asarray(other))
        other = self._coerce(other)
        a, b = self.coeffs, other.coeffs
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape),
                       dtype=np.result_type(a, b))
        for n in range(self.order + 1):
            for k in range(n + 1):
                out[n] += a[k] * b[n - k]
        return Jet(out)

    __rmul__ = __mul__

    def __pow__(self, a):
        if isinstance(a, (int, np.integer)) and a >= 0:
            result = Jet.constant(np.ones_like(self.coeffs[0]), self.order)
            base = self
            while a:
                if a & 1:
                    result = result * base
                a >>= 1
                if a:
                    base = base * base
            return result
        f = self.coeffs
        g = np.zeros_like(f, dtype=np.result_type(f, float))
        g[0] = f[0] ** a
        for n in range(1, self.order + 1):
            acc = 0.0
            for k in range(1, n + 1):
                acc = acc + ((a + 1.0) * k - n) * f[k] * g[n - k]
            g[n] = acc / (n * f[0])
        return Jet(g)

    def exp(self):
        f = self.coeffs
        g = np.zeros_like(f, dtype=np.result_type(f, float))
        g[0] = np.exp(f[0])
        for n in range(1, self.order + 1):
            acc = 0.0
            for k in range(1, n + 1):
                acc = acc + k * f[k] * g[n - k]
            g[n] = acc / n
        return Jet(g)

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={self.coeffs!r})"


def jet_eval(kernel: Callable, order: int, a: float, b: float,
             spec: QuadratureSpec = DEFAULT_QUAD) -> Jet:
    """Jet of ``integral kernel(x, s) dx`` by integrating kernel jets.

    ``kernel(x)`` returns the ``order + 1`` Taylor coefficients (in ``s``)
    of the integrand at ``x``.
    """
    def f(x):
        c = np.asarray(kernel(x))
        if c.shape[0] != order + 1:
            raise ValueError("kernel returned the wrong number of coefficients")
        return c
    return Jet(integrate(f, a, b, spec))


# --------------------------------------------------------------------------
# inverse Laplace transform
# --------------------------------------------------------------------------

class InversionMethod(enum.Enum):
    TALBOT = "talbot"
    EULER = "euler"


@dataclass(frozen=True)
class InverseLaplaceSpec:
    """``node_count`` is M: Talbot uses M contour nodes, Euler 2M + 1."""

    method: InversionMethod = InversionMethod.TALBOT
    node_count: int = 48

    def __post_init__(self):
        if self.node_count < 8:
            raise ValueError("node_count must be >= 8")


TALBOT = InverseLaplaceSpec()
EULER = InverseLaplaceSpec(InversionMethod.EULER, 16)


class InversionWarning(RuntimeWarning):
    pass


def talbot_nodes(t: float, m: int):
    """Fixed-Talbot nodes ``s_k`` and complex weights for ``f(t)``."""
    r = 2.0 * m / (5.0 * t)
    theta = np.arange(1, m) * math.pi / m
    cot = 1.0 / np.tan(theta)
    s = np.concatenate([[r + 0j], r * theta * (cot + 1j)])
    sigma = theta + (theta * cot - 1.0) * cot
    w = np.concatenate([[0.5 + 0j], (1.0 + 1j * sigma)]) * (r / m)
    return s, w


@lru_cache(maxsize=None)
def _euler_xi(m):
    xi = np.ones(2 * m + 1)
    xi[0] = 0.5
    xi[2 * m] = 2.0 ** -m
    for k in range(1, m):
        xi[2 * m - k] = xi[2 * m - k + 1] + 2.0 ** -m * special.comb(m, k, exact=True)
    return xi


def euler_nodes(t: float, m: int):
    """Abate-Whitt Euler-summation nodes and (real) weights."""
    k = np.arange(2 * m + 1)
    beta = m * math.log(10.0) / 3.0 + 1j * math.pi * k
    eta = 10.0 ** (m / 3.0) * (-1.0) ** k * _euler_xi(m)
    return beta / t, eta / t


def inverse_laplace(F: Callable, t: float,
                    spec: InverseLaplaceSpec = TALBOT) -> float:
    """Value at ``t > 0`` of the function whose transform is ``F``.

    ``F`` is called once with the array of all complex nodes.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if spec.method is InversionMethod.TALBOT:
        s, w = talbot_nodes(t, spec.node_count)
        vals = np.asarray(F(s)) * np.exp(s * t)
        return float(np.real(np.sum(w * vals)))
    s, w = euler_nodes(t, spec.node_count)
    vals = np.asarray(F(s))
    return float(np.sum(w * np.real(vals)))


@dataclass(frozen=True)
class CdfInversion:
    value: float
    raw: float
    method: InversionMethod


def inverse_laplace_cdf(L: Callable, t: float,
                        spec: InverseLaplaceSpec = TALBOT,
                        warn_tol: float = 1e-3) -> CdfInversion:
    """CDF at ``t`` of a positive random variable with transform ``L``.

    Inverts ``L(s) / s``. The result is clamped to [0, 1]; the raw value is
    kept and an :class:`InversionWarning` is issued when clamping moved it
    by more than ``warn_tol``.
    """
    raw = inverse_laplace(lambda s: L(s) / s, t, spec)
    value = min(max(raw, 0.0), 1.0)
    if abs(raw - value) > warn_tol:
        warnings.warn(f"inverted CDF {raw:.6g} left [0, 1] at t={t:g}",
                      InversionWarning, stacklevel=2)
    return CdfInversion(value, raw, spec.method)
