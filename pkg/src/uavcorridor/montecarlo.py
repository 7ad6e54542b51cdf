"""Monte-Carlo simulator of the corridor network, slot by slot.

Each slot draws a fresh corridor and independent harvest-phase and
communication-phase fading/shadowing for every UAV. Slots are generated in
fixed-size chunks whose random streams are derived from ``(seed, chunk
index)`` only, so results do not depend on the number of worker threads and
two configurations run with the same seed share random numbers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry
from .model import (NetworkConfig, Phase, ChannelDraw, path_loss,
                    sample_fading, sample_shadow)

CHUNK_SLOTS = 1 << 16
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SlotOutcome:
    harvested_j: float
    sinr: float
    energy_covered: bool
    comm_covered: bool

    @property
    def joint_covered(self) -> bool:
        return self.energy_covered and self.comm_covered


@dataclass(frozen=True)
class SlotSamples:
    """Raw per-slot harvested energy and SINR."""

    harvested_j: np.ndarray
    sinr: np.ndarray

    def __len__(self):
        return len(self.sinr)


@dataclass(frozen=True)
class McEstimate:
    p_h: float
    p_c: float
    p_jc: float
    halfwidth_h: float
    halfwidth_c: float
    halfwidth_jc: float
    n_slots: int
    seed: int

    @property
    def halfwidth_95(self) -> dict:
        return {"p_h": self.halfwidth_h, "p_c": self.halfwidth_c,
                "p_jc": self.halfwidth_jc}


def halfwidth(p: float, n: int) -> float:
    return Z95 * math.sqrt(p * (1.0 - p) / n)


def estimate(samples: SlotSamples, gamma_h: float, gamma_c: float,
             seed: int = -1) -> McEstimate:
    energy = samples.harvested_j >= gamma_h
    comm = samples.sinr >= gamma_c
    n = len(samples)
    p_h, p_c = energy.mean(), comm.mean()
    p_jc = (energy & comm).mean()
    return McEstimate(float(p_h), float(p_c), float(p_jc),
                      halfwidth(p_h, n), halfwidth(p_c, n), halfwidth(p_jc, n),
                      n, seed)


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _link_draws(config: NetworkConfig, rng, shape):
    """Fading gain times shadowing factor for each link in ``shape``."""
    h = sample_fading(config.nakagami_m, rng, shape)
    s = sample_shadow(config.shadow_q, config.shadow_gamma, rng, shape)
    return h * s


def _chunk(config: NetworkConfig, seed: int, index: int, n: int,
           r_pin: Optional[float]):
    rng = _chunk_rng(seed, index)
    N = config.n_uavs
    if r_pin is None:
        u = rng.uniform(-config.radius_m, config.radius_m, (n, N))
        d = geometry.distance_from_offset(config, u)
        serving = np.argmin(d, axis=1)
    else:
        d = np.empty((n, N))
        d[:, 0] = r_pin
        if N > 1:
            d[:, 1:] = geometry.sample_interferer_distances(config, r_pin, rng, (n, N - 1))
        serving = np.zeros(n, dtype=int)
    gain = path_loss(config, d)
    harvested = config.harvest_scale * np.sum(_link_draws(config, rng, (n, N)) * gain, axis=1)

    rows = np.arange(n)
    received = config.tx_power_w * _link_draws_comm(config, rng, (n, N), serving) * gain
    signal = received[rows, serving]
    # summed with the serving entry masked out; total - signal would cancel
    others = received.copy()
    others[rows, serving] = 0.0
    interference = others.sum(axis=1)
    with np.errstate(divide="ignore"):
        sinr = signal / (interference + config.noise_w)
    return harvested, sinr


def _link_draws_comm(config, rng, shape, serving):
    """Comm-phase gains: serving link uses the Nakagami m of the serving
    fading, the rest use ``interferer_m`` (equal by default)."""
    h_serv = sample_fading(config.nakagami_m, rng, shape)
    if config.interferer_m != config.nakagami_m:
        h_int = sample_fading(config.interferer_m, rng, shape)
        cols = np.arange(shape[1])[None, :]
        h_serv = np.where(cols == serving[:, None], h_serv, h_int)
    s = sample_shadow(config.shadow_q, config.shadow_gamma, rng, shape)
    return h_serv * s


def sample_slots(config: NetworkConfig, n_slots: int, seed: int = 0,
                 threads: int = 1, r_pin: Optional[float] = None) -> SlotSamples:
    """Raw harvested energy and SINR for ``n_slots`` independent slots.

    With ``r_pin`` the serving UAV is pinned at that distance and the other
    N - 1 distances are drawn from the conditional interferer law.
    """
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    if r_pin is not None:
        geometry._check_serving(config, r_pin)
    sizes = [CHUNK_SLOTS] * (n_slots // CHUNK_SLOTS)
    if n_slots % CHUNK_SLOTS:
        sizes.append(n_slots % CHUNK_SLOTS)
    jobs = [(config, seed, i, n, r_pin) for i, n in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _chunk(*a), jobs))
    else:
        parts = [_chunk(*a) for a in jobs]
    return SlotSamples(np.concatenate([p[0] for p in parts]),
                       np.concatenate([p[1] for p in parts]))


def simulate(config: NetworkConfig, n_slots: int = 10 ** 6, seed: int = 0,
             threads: int = 1) -> McEstimate:
    samples = sample_slots(config, n_slots, seed, threads)
    return estimate(samples, config.energy_threshold_j, config.sinr_threshold, seed)


def simulate_conditioned(config: NetworkConfig, r_pin: float,
                         n_slots: int = 10 ** 6, seed: int = 0,
                         threads: int = 1) -> McEstimate:
    samples = sample_slots(config, n_slots, seed, threads, r_pin=r_pin)
    return estimate(samples, config.energy_threshold_j, config.sinr_threshold, seed)


def sample_harvest_distribution(config: NetworkConfig, n_slots: int,
                                seed: int = 0, threads: int = 1) -> np.ndarray:
    return sample_slots(config, n_slots, seed, threads).harvested_j


def simulate_slot(config: NetworkConfig, rng: np.random.Generator) -> SlotOutcome:
    """One slot, drawn link by link (slow; for inspection and tests)."""
    net = geometry.sample_corridor(config, rng)
    harvest = [ChannelDraw(sample_fading(config.nakagami_m, rng),
                           sample_shadow(config.shadow_q, config.shadow_gamma, rng),
                           Phase.HARVEST) for _ in range(config.n_uavs)]
    comm = [ChannelDraw(sample_fading(config.nakagami_m if i == net.serving_index
                                      else config.interferer_m, rng),
                        sample_shadow(config.shadow_q, config.shadow_gamma, rng),
                        Phase.COMM) for i in range(config.n_uavs)]
    gain = np.atleast_1d(path_loss(config, net.link_distances))
    energy = config.harvest_scale * sum(
        c.fading_gain * c.shadow_factor * g for c, g in zip(harvest, gain))
    rx = [config.tx_power_w * c.fading_gain * c.shadow_factor * g
          for c, g in zip(comm, gain)]
    signal = rx[net.serving_index]
    interference = sum(rx) - signal
    sinr = signal / (interference + config.noise_w)
    return SlotOutcome(energy, sinr, energy >= config.energy_threshold_j,
                       sinr >= config.sinr_threshold)


def write_samples_csv(path, samples: SlotSamples, config: NetworkConfig):
    """One row per slot: harvested energy, SINR and the three indicators."""
    gh, gc = config.energy_threshold_j, config.sinr_threshold
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["harvested_j", "sinr", "energy_covered",
                         "comm_covered", "joint_covered"])
        for e, s in zip(samples.harvested_j, samples.sinr):
            ec, cc = int(e >= gh), int(s >= gc)
            writer.writerow([f"{e:.12g}", f"{s:.12g}", ec, cc, ec & cc])
