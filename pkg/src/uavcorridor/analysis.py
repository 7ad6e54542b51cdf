"""Energy, SINR and joint coverage of the typical receiver.

Conventions
-----------
* Integrals over a link distance run in the horizontal offset ``x`` where the
  law is uniform, using Gauss-Legendre rules (the integrands are smooth).
* Integrals against the serving-distance law run in the offset as well, where
  the density ``N/R (1 - x/R)**(N-1)`` is a polynomial.
* Expectations over shadowing use either adaptive quadrature (complex
  arguments of the energy transform) or the log-space trapezoidal
  :func:`~uavcorridor.model.shadow_rule` (everything on the real axis).
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import geometry
from .model import NetworkConfig, path_loss, inv_gamma_pdf, shadow_rule
from .numerics import (Jet, QuadratureSpec, InverseLaplaceSpec, TALBOT,
                       gauss_legendre, integrate, inverse_laplace_cdf,
                       jet_eval, tanh_sinh)


class Method(enum.Enum):
    EXACT_LAPLACE = "exact-laplace"
    GAMMA_APPROX = "gamma-approx"
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte-carlo"


@dataclass
class CoverageResult:
    value: float
    method: Method
    ci_halfwidth: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"coverage probability {self.value} outside [0, 1]")

    def __float__(self):
        return float(self.value)


class DegenerateModelError(ValueError):
    """The requested quantity does not exist for this configuration."""


# quadrature orders; raised only if a convergence test says so
N_OFFSET = 48        # Gauss-Legendre nodes over an offset interval
N_SERVING = 64       # Gauss-Legendre nodes over the serving offset
N_TANH_SINH = 81
SHADOW_STEP = 0.2

LAPLACE_QUAD = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-14)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


# --------------------------------------------------------------------------
# harvested energy, exact route
# --------------------------------------------------------------------------

def energy_laplace(config: NetworkConfig, s, quad: QuadratureSpec = LAPLACE_QUAD):
    """Laplace transform of the harvested energy at (complex) ``s``.

    Fading is averaged in closed form, the link distance by Gauss-Legendre
    over the uniform offset and the shadowing by adaptive quadrature; the
    single-link transform is raised to the N-th power.
    """
    s = np.asarray(s, dtype=complex)
    shape = s.shape
    s = s.ravel()
    c = config.harvest_scale
    m = config.nakagami_m
    if c == 0.0:
        return _scalar(np.ones(shape, dtype=complex)) if shape else 1.0 + 0j
    x, w = gauss_legendre(N_OFFSET, 0.0, config.radius_m)
    w = w / config.radius_m
    gain = path_loss(config, geometry.distance_from_offset(config, x))
    coef = np.outer(s * (c / m), gain)
    q, g = config.shadow_q, config.shadow_gamma

    def integrand(S):
        if S == 0.0:
            return np.zeros_like(s)
        return ((1.0 + coef * S) ** (-m) @ w) * inv_gamma_pdf(q, g, S)

    spec = QuadratureSpec(quad.rel_tol, quad.abs_tol, quad.max_subdivisions,
                          quad.semi_infinite_map, config.shadow_mean)
    single = integrate(integrand, 0.0, math.inf, spec)
    out = (single ** config.n_uavs).reshape(shape)
    return out if shape else complex(out)


def energy_coverage_exact(config: NetworkConfig,
                          inversion: InverseLaplaceSpec = TALBOT,
                          quad: QuadratureSpec = LAPLACE_QUAD) -> CoverageResult:
    """P(E_h >= gamma_h) by inverting the energy transform."""
    gamma_h = config.energy_threshold_j
    if gamma_h == 0.0:
        return CoverageResult(1.0, Method.EXACT_LAPLACE)
    if config.harvest_scale == 0.0:
        return CoverageResult(0.0, Method.EXACT_LAPLACE)
    inv = inverse_laplace_cdf(lambda s: energy_laplace(config, s, quad),
                              gamma_h, inversion)
    return CoverageResult(1.0 - inv.value, Method.EXACT_LAPLACE,
                          diagnostics={"raw_cdf": inv.raw,
                                       "inversion": inv.method.value})


# --------------------------------------------------------------------------
# harvested energy, moment-matched route
# --------------------------------------------------------------------------

@dataclass
class MomParams:
    k_mom: np.ndarray
    theta_mom: np.ndarray
    cond_mean: np.ndarray
    cond_second_moment: np.ndarray
    serving_r: np.ndarray

    @property
    def variance(self):
        return self.cond_second_moment - self.cond_mean ** 2


def _interferer_offsets(config: NetworkConfig, r, n=N_OFFSET):
    """Offsets of the conditional interferer law and their (summing to 1)
    weights; shapes ``(len(r), n)`` and ``(n,)``."""
    x_r = geometry.horizontal_offset(config, r)
    t, w = gauss_legendre(n, 0.0, 1.0)
    x = x_r[..., None] + (config.radius_m - x_r)[..., None] * t
    return x, w


def _conditional_path_gain_moments(config: NetworkConfig, r):
    """E[l(v) | r] and E[l(v)^2 | r]."""
    x, w = _interferer_offsets(config, r)
    gain = path_loss(config, geometry.distance_from_offset(config, x))
    return gain @ w, (gain * gain) @ w


def single_term_moments(config: NetworkConfig, r):
    """First and second moment of one non-serving harvested term given r."""
    c = config.harvest_scale
    m = config.nakagami_m
    el, el2 = _conditional_path_gain_moments(config, np.asarray(r, dtype=float))
    mean = c * config.shadow_mean * el
    second = c * c * config.shadow_second_moment * (m + 1.0) / m * el2
    return mean, second


def mom_params(config: NetworkConfig, r) -> MomParams:
    """Gamma shape/scale matching the first two moments of the energy
    harvested from the N - 1 non-serving UAVs, given the serving distance."""
    n = config.n_uavs
    if n < 2:
        raise DegenerateModelError("no non-serving UAVs when n_uavs == 1")
    if config.shadow_q <= 2:
        raise DegenerateModelError(
            "shadowing has infinite variance for q <= 2; moment matching "
            "is undefined")
    r = np.asarray(geometry._check_serving(config, r), dtype=float)
    ex, ex2 = single_term_moments(config, r)
    mean = (n - 1) * ex
    second = (n - 1) * ex2 + (n - 1) * (n - 2) * ex * ex
    var = (n - 1) * (ex2 - ex * ex)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = mean * mean / var
        theta = var / mean
    return MomParams(_scalar(k), _scalar(theta), _scalar(mean), _scalar(second),
                     _scalar(r))


def multinomial_moment(config: NetworkConfig, r: float, power: int = 2) -> float:
    """E[(sum of N-1 non-serving terms)**power | r] by the literal
    multinomial expansion, one term per exponent composition."""
    n_terms = config.n_uavs - 1
    ex, ex2 = single_term_moments(config, float(r))
    moments = {0: 1.0, 1: float(ex), 2: float(ex2)}
    if power > 2:
        raise NotImplementedError("only moments up to order 2 are available")
    total = 0.0
    for ks in itertools.product(range(power + 1), repeat=n_terms):
        if sum(ks) != power:
            continue
        coef = math.factorial(power)
        prod = 1.0
        for k in ks:
            coef //= math.factorial(k)
            prod *= moments[k]
        total += coef * prod
    return total


def cond_energy_coverage(config: NetworkConfig, r):
    """Energy coverage given the serving distance (Gamma approximation).

    The serving term ``c S h l(r)`` is handled exactly: a Gamma(m, 1/m)
    gain times an inverse-gamma factor is ``(gamma/m)`` times a
    beta-prime(m, q) variable, so the expectation over (S, h) reduces to
    one integral over a Beta(m, q) variable ``u``. The non-serving energy
    is Gamma(k_mom, theta_mom); its upper tail uses the regularized
    incomplete gamma function.
    """
    r = np.asarray(r, dtype=float)
    gamma_h = config.energy_threshold_j
    if gamma_h == 0.0:
        return _scalar(np.ones_like(r))
    if config.harvest_scale == 0.0:
        return _scalar(np.zeros_like(r))
    m, q = config.nakagami_m, config.shadow_q
    # serving energy = a * u / (1 - u), u ~ Beta(m, q)
    a = config.harvest_scale * np.asarray(path_loss(config, r)) * config.shadow_gamma / m
    b0 = gamma_h / a
    u0 = b0 / (1.0 + b0)
    serving_alone = special.betainc(q, m, 1.0 / (1.0 + b0))
    if config.n_uavs == 1:
        return _scalar(np.clip(serving_alone, 0.0, 1.0))
    mp = mom_params(config, r)
    k = np.asarray(mp.k_mom)[..., None]
    theta = np.asarray(mp.theta_mom)[..., None]
    t, dist, w = tanh_sinh(N_TANH_SINH)
    u0_ = u0[..., None]
    u = u0_ * t
    gap = u0_ * dist                     # u0 - u without cancellation
    # gamma_h - a u/(1-u) = a (u0 - u) / ((1 - u0)(1 - u))
    residual = a[..., None] * gap / ((1.0 - u0_) * (1.0 - u))
    beta_pdf = np.exp((m - 1) * np.log(u) + (q - 1) * np.log1p(-u)
                      - special.betaln(m, q))
    tail = special.gammaincc(k, residual / theta)
    inner = (tail * beta_pdf * u0_) @ w
    return _scalar(np.clip(serving_alone + inner, 0.0, 1.0))


def _serving_nodes(config: NetworkConfig, n=N_SERVING):
    """Serving distances and weights for integrals against the serving law."""
    x, w = gauss_legendre(n, 0.0, config.radius_m)
    w = w * geometry.serving_offset_pdf(config, x)
    return geometry.distance_from_offset(config, x), w


def energy_coverage_approx(config: NetworkConfig) -> CoverageResult:
    if config.energy_threshold_j == 0.0:
        return CoverageResult(1.0, Method.GAMMA_APPROX)
    r, w = _serving_nodes(config)
    value = float(cond_energy_coverage(config, r) @ w)
    return CoverageResult(min(max(value, 0.0), 1.0), Method.GAMMA_APPROX)


# --------------------------------------------------------------------------
# SINR
# --------------------------------------------------------------------------

def _interference_kernel_coeffs(config, s, gain_shadow, order):
    """Taylor coefficients in ``s`` of ``(1 + s b / m_I)**(-m_I)``.

    ``gain_shadow`` is ``b = p S l(v)``; the k-th coefficient is
    ``(-1)^k C(m_I + k - 1, k) (b/m_I)^k (1 + s b/m_I)^(-m_I - k)``.
    """
    mi = config.interferer_m
    z = gain_shadow / mi
    base = 1.0 / (1.0 + s * z)
    out = []
    for k in range(order + 1):
        coef = (-1) ** k * special.comb(mi + k - 1, k)
        out.append(coef * z ** k * base ** (mi + k))
    return out


def interferer_transform_jet(config: NetworkConfig, r: float, s0: float,
                             order: int, quad: QuadratureSpec = QuadratureSpec()):
    """Jet at ``s0`` of the single-interferer transform given ``r``, by
    adaptive quadrature over the shadowing."""
    x, w = _interferer_offsets(config, float(r))
    gain = config.tx_power_w * path_loss(config, geometry.distance_from_offset(config, x))
    q, g = config.shadow_q, config.shadow_gamma

    def kernel(S):
        if S == 0.0:
            return np.zeros(order + 1)
        pdf = inv_gamma_pdf(q, g, S)
        coeffs = _interference_kernel_coeffs(config, s0, gain * S, order)
        return np.array([c @ w for c in coeffs]) * pdf

    spec = QuadratureSpec(quad.rel_tol, quad.abs_tol, quad.max_subdivisions,
                          quad.semi_infinite_map, config.shadow_mean)
    return jet_eval(kernel, order, 0.0, math.inf, spec)


def interference_laplace_jet(config: NetworkConfig, r: float, s0: float,
                             order: Optional[int] = None,
                             quad: QuadratureSpec = QuadratureSpec()) -> Jet:
    """Jet at ``s0`` of the conditional interference transform
    ``L_I(s | r) = J(s)**(N-1)``; the default order is ``m - 1``."""
    if order is None:
        order = config.nakagami_m - 1
    geometry._check_serving(config, r)
    if config.n_uavs == 1:
        return Jet.constant(1.0, order)
    return interferer_transform_jet(config, r, s0, order, quad) ** (config.n_uavs - 1)


def interference_laplace(config: NetworkConfig, r: float, s):
    """L_I(s | r) at real ``s`` >= 0 by direct double quadrature."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if config.n_uavs == 1:
        return np.ones_like(s)
    x, w = _interferer_offsets(config, float(r))
    gain = config.tx_power_w * path_loss(config, geometry.distance_from_offset(config, x))
    mi = config.interferer_m
    q, g = config.shadow_q, config.shadow_gamma

    def f(S):
        if S == 0.0:
            return np.zeros_like(s)
        return ((1.0 + np.outer(s, gain) * S / mi) ** (-mi) @ w) * inv_gamma_pdf(q, g, S)

    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-14, scale=config.shadow_mean)
    return integrate(f, 0.0, math.inf, spec) ** (config.n_uavs - 1)


def _total_interference_jets(config: NetworkConfig, r, s, order):
    """Jets of ``exp(-sigma^2 s) L_I(s | r)`` at ``s`` (shape ``(nr, ns)``),
    with the shadowing integrated by the log-space trapezoidal rule."""
    rule = shadow_rule(config.shadow_q, config.shadow_gamma, SHADOW_STEP)
    x, w = _interferer_offsets(config, r)                 # (nr, nv)
    gain = config.tx_power_w * path_loss(config, geometry.distance_from_offset(config, x))
    # b over (nr, nS', nv)
    b = gain[:, None, :] * rule.nodes[None, :, None]
    coeffs = np.empty((order + 1,) + s.shape)
    for i in range(s.shape[0]):
        ks = _interference_kernel_coeffs(config, s[i][:, None, None], b[i][None], order)
        for k, c in enumerate(ks):
            coeffs[k, i] = (c @ w) @ rule.weights
    jet = Jet(coeffs) ** (config.n_uavs - 1) if config.n_uavs > 1 \
        else Jet.constant(np.ones(s.shape), order)
    return _noise_jet(config, s, order) * jet


def _noise_jet(config, s, order):
    exponent = Jet.constant(-config.noise_w * s, order)
    if order >= 1:
        exponent.coeffs[1] = -config.noise_w
    return exponent.exp()


def cond_comm_coverage(config: NetworkConfig, r, with_interference: bool = True):
    """SINR coverage given the serving distance.

    For integer ``m`` the serving-fading cCDF is a finite sum, so given the
    serving shadowing S the coverage is
    ``sum_k (-s)^k / k! d^k/ds^k [exp(-sigma^2 s) L_I(s|r)]`` at
    ``s = m gamma_c / (p l(r) S)``; S is then averaged out.
    ``with_interference=False`` drops the interference term (diagnostic).
    """
    r = np.atleast_1d(np.asarray(geometry._check_serving(config, r), dtype=float))
    scalar = np.ndim(r) == 1 and r.size == 1
    m = config.nakagami_m
    order = m - 1
    rule = shadow_rule(config.shadow_q, config.shadow_gamma, SHADOW_STEP)
    signal = config.tx_power_w * path_loss(config, r)
    s = m * config.sinr_threshold / (signal[:, None] * rule.nodes[None, :])
    if with_interference:
        jet = _total_interference_jets(config, r, s, order)
    else:
        jet = _noise_jet(config, s, order)
    k = np.arange(order + 1).reshape(-1, 1, 1)
    given_s = np.sum((-s) ** k * jet.coeffs, axis=0)
    raw = given_s @ rule.weights
    value = np.clip(raw, 0.0, 1.0)
    if np.any(np.abs(raw - value) > 1e-6):
        warnings.warn("conditional SINR coverage left [0, 1] by more than 1e-6",
                      RuntimeWarning, stacklevel=2)
    return float(value[0]) if scalar else value


def comm_coverage(config: NetworkConfig) -> CoverageResult:
    r, w = _serving_nodes(config)
    value = float(cond_comm_coverage(config, r) @ w)
    return CoverageResult(min(max(value, 0.0), 1.0), Method.ANALYTIC)


# --------------------------------------------------------------------------
# joint
# --------------------------------------------------------------------------

@dataclass
class CoverageProfile:
    """Conditional coverages on the serving-distance quadrature nodes."""

    r: np.ndarray
    weights: np.ndarray
    p_h: np.ndarray
    p_c: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.clip(self.p_h @ self.weights, 0.0, 1.0))

    @property
    def comm(self) -> float:
        return float(np.clip(self.p_c @ self.weights, 0.0, 1.0))

    @property
    def joint(self) -> float:
        return float(np.clip((self.p_h * self.p_c) @ self.weights, 0.0, 1.0))


def coverage_profile(config: NetworkConfig) -> CoverageProfile:
    r, w = _serving_nodes(config)
    return CoverageProfile(r, w, np.atleast_1d(cond_energy_coverage(config, r)),
                           np.atleast_1d(cond_comm_coverage(config, r)))


def joint_coverage(config: NetworkConfig) -> CoverageResult:
    """Joint energy and SINR coverage: both conditional coverages share the
    serving-distance nodes and are multiplied before deconditioning."""
    prof = coverage_profile(config)
    return CoverageResult(prof.joint, Method.GAMMA_APPROX,
                          diagnostics={"p_h_approx": prof.energy,
                                       "p_c": prof.comm})
