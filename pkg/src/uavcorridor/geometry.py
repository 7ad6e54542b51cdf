"""Distance laws of a 1D binomial point process on an aerial corridor.

The receiver sits at the ground origin under the corridor midpoint, so a
UAV's link distance is ``sqrt(u**2 + h**2)`` with ``|u| ~ Uniform(0, R)``.
Most integrals in the package are written in the horizontal offset
``x = sqrt(d**2 - h**2)``, in which the link law is uniform and the serving
law is ``N/R (1 - x/R)**(N-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkConfig


@dataclass(frozen=True)
class DistanceSupport:
    lower_m: float
    upper_m: float

    def __post_init__(self):
        if not (np.isfinite(self.lower_m) and np.isfinite(self.upper_m)):
            raise ValueError("support bounds must be finite")
        if not self.lower_m < self.upper_m:
            raise ValueError("empty distance support")


@dataclass(frozen=True)
class NetworkRealization:
    """One sampled corridor: signed offsets, link distances and their order."""

    offsets: np.ndarray
    link_distances: np.ndarray
    ordered_distances: np.ndarray
    serving_index: int

    @property
    def serving_distance(self) -> float:
        return float(self.ordered_distances[0])

    @property
    def interferer_distances(self) -> np.ndarray:
        return self.ordered_distances[1:]


def link_support(config: NetworkConfig) -> DistanceSupport:
    return DistanceSupport(config.altitude_m, config.max_distance)


def horizontal_offset(config: NetworkConfig, d):
    """x = sqrt(d^2 - h^2), clipped at zero."""
    d = np.asarray(d, dtype=float)
    return np.sqrt(np.maximum(d * d - config.altitude_m ** 2, 0.0))


def distance_from_offset(config: NetworkConfig, x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(x * x + config.altitude_m ** 2)


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def serving_pdf(config: NetworkConfig, r):
    """Density of the nearest-UAV distance.

    Diverges (integrably) at ``r = h``; the value returned there is ``inf``.
    Use :func:`serving_offset_pdf` for quadrature.
    """
    h, R, n = config.altitude_m, config.radius_m, config.n_uavs
    r = np.asarray(r, dtype=float)
    inside = (r >= h) & (r <= config.max_distance)
    x = horizontal_offset(config, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = n * (1.0 - x / R) ** (n - 1) * r / (R * x)
    return _scalar(np.where(inside, dens, 0.0))


def serving_offset_pdf(config: NetworkConfig, x):
    """Serving law in the offset variable: the minimum of N Uniform(0, R)."""
    R, n = config.radius_m, config.n_uavs
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= R)
    dens = n / R * np.clip(1.0 - x / R, 0.0, 1.0) ** (n - 1)
    return _scalar(np.where(inside, dens, 0.0))


def serving_cdf(config: NetworkConfig, r):
    x = horizontal_offset(config, np.clip(r, config.altitude_m, config.max_distance))
    out = 1.0 - (1.0 - x / config.radius_m) ** config.n_uavs
    return _scalar(np.where(np.asarray(r) < config.altitude_m, 0.0, out))


def link_cdf(config: NetworkConfig, d):
    h, R = config.altitude_m, config.radius_m
    d = np.clip(np.asarray(d, dtype=float), h, config.max_distance)
    return _scalar(np.minimum(horizontal_offset(config, d) / R, 1.0))


def link_pdf(config: NetworkConfig, d):
    h, R = config.altitude_m, config.radius_m
    d = np.asarray(d, dtype=float)
    inside = (d >= h) & (d <= config.max_distance)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = d / (R * horizontal_offset(config, d))
    return _scalar(np.where(inside, dens, 0.0))


def _check_serving(config: NetworkConfig, r):
    r = np.asarray(r, dtype=float)
    if np.any((r < config.altitude_m) | (r > config.max_distance)):
        raise ValueError(
            f"serving distance must lie in [{config.altitude_m}, "
            f"{config.max_distance}]")
    return r


def interferer_pdf_given_r(config: NetworkConfig, r, v):
    """Density of a non-serving distance given the serving distance ``r``.

    Computed as ``link_pdf(v) / (1 - link_cdf(r))`` on ``[r, sqrt(h^2+R^2)]``.
    """
    r = _check_serving(config, r)
    if np.any(r >= config.max_distance):
        raise ValueError("serving distance must be below the corridor edge")
    v = np.asarray(v, dtype=float)
    inside = (v >= r) & (v <= config.max_distance)
    tail = 1.0 - horizontal_offset(config, r) / config.radius_m
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = link_pdf(config, v) / tail
    return _scalar(np.where(inside, dens, 0.0))


def interferer_support(config: NetworkConfig, r: float) -> DistanceSupport:
    return DistanceSupport(float(r), config.max_distance)


def sample_interferer_distances(config: NetworkConfig, r, rng, size):
    """Inverse-CDF draws from the truncated link law on ``[r, r_max]``."""
    x_r = horizontal_offset(config, _check_serving(config, r))
    u = rng.random(size)
    x = x_r + u * (config.radius_m - x_r)
    return distance_from_offset(config, x)


def sample_corridor(config: NetworkConfig, rng: np.random.Generator) -> NetworkRealization:
    R = config.radius_m
    offsets = rng.uniform(-R, R, size=config.n_uavs)
    d = distance_from_offset(config, offsets)
    order = np.argsort(d, kind="stable")
    return NetworkRealization(offsets, d, d[order], int(order[0]))
