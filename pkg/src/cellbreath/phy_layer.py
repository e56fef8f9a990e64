"""Two-cell downlink SINR under cell breathing, and capture probabilities.

Cell 1 is the serving cell, cell 2 the interferer.  Under cell breathing a
far user is served at full power ``p1`` while the other cell transmits at
reduced power ``p2`` (to one of its near users), and vice versa.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .markov_channel import ACK, NACK, make_rng

NEAR = "near"
FAR = "far"

_CHUNK = 1 << 18


@dataclass(frozen=True)
class CellGeometry:
    d_near: float
    d_far: float
    d_cross_near: float
    d_cross_far: float
    alpha: float = 3.0

    def __post_init__(self):
        for name in ("d_near", "d_far", "d_cross_near", "d_cross_far"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_far <= self.d_near:
            raise ValueError("d_far must exceed d_near")
        if self.alpha < 2:
            raise ValueError("attenuation exponent alpha must be >= 2")


@dataclass(frozen=True)
class PowerLevels:
    p1: float
    p2: float

    def __post_init__(self):
        if not (0 < self.p2 < self.p1):
            raise ValueError("need 0 < p2 < p1")


@dataclass(frozen=True)
class Fading:
    """Unit-mean power-gain distribution for ``|h|^2``.

    ``kind="exponential"`` is Rayleigh amplitude fading; ``kind="gamma"`` is
    Nakagami-m with shape ``m``.
    """

    kind: str = "exponential"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "gamma"):
            raise ValueError(f"unknown fading family {self.kind!r}")
        if self.m <= 0:
            raise ValueError("Nakagami shape m must be positive")

    def sample(self, rng, size):
        if self.kind == "exponential":
            return rng.standard_exponential(size)
        return rng.gamma(self.m, 1.0 / self.m, size)


def _link_gains(group, powers, geom):
    """(signal scale, interference scale) for one user group."""
    if group == FAR:
        return powers.p1 / geom.d_far**geom.alpha, powers.p2 / geom.d_cross_far**geom.alpha
    if group == NEAR:
        return powers.p2 / geom.d_near**geom.alpha, powers.p1 / geom.d_cross_near**geom.alpha
    raise ValueError(f"group must be 'near' or 'far', got {group!r}")


def _sinr(group, powers, geom, h_signal, h_interf, noise):
    if noise < 0:
        raise ValueError("noise must be non-negative")
    h_signal = np.asarray(h_signal, dtype=float)
    h_interf = np.asarray(h_interf, dtype=float)
    if np.any(h_signal < 0) or np.any(h_interf < 0):
        raise ValueError("fading gains must be non-negative")
    if noise == 0 and np.any(h_interf == 0):
        raise ValueError("SINR undefined with zero noise and zero interference")
    sig, intf = _link_gains(group, powers, geom)
    out = sig * h_signal / (noise + intf * h_interf)
    return out if out.ndim else float(out)


def sinr_far(powers, geom, h_signal, h_interf, noise):
    """SINR of a far user served at ``p1`` while the other cell uses ``p2``."""
    return _sinr(FAR, powers, geom, h_signal, h_interf, noise)


def sinr_near(powers, geom, h_signal, h_interf, noise):
    """SINR of a near user served at ``p2`` while the other cell uses ``p1``."""
    return _sinr(NEAR, powers, geom, h_signal, h_interf, noise)


def decode(sinr, gamma):
    """ARQ bit for threshold decoding: ACK iff ``sinr >= gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return ACK if sinr >= gamma else NACK


def equalizing_power_ratio(geom):
    """``p1 / p2`` that makes near and far SINR identically distributed.

    Exact in the interference-limited regime (zero noise) with i.i.d.
    fading: both SINRs reduce to a constant times ``h_s / h_i`` and the two
    constants coincide at this ratio.
    """
    ratio = (geom.d_far * geom.d_cross_near / (geom.d_near * geom.d_cross_far)) ** (geom.alpha / 2)
    if ratio <= 1:
        raise ValueError(
            "geometry cannot be equalized with p1 > p2 (need d_far*d_cross_near > d_near*d_cross_far)"
        )
    return ratio


def capture_probability(group, powers, geom, gamma, noise=0.0, fading=Fading(), samples=10**6,
                        seed=0, workers=1):
    """Monte Carlo estimate of ``P(SINR >= gamma)`` for a near or far user.

    Samples are drawn in fixed-size chunks, each from its own stream keyed by
    the chunk number, so the estimate depends only on ``seed`` and not on
    ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    sig, intf = _link_gains(group, powers, geom)
    sizes = [min(_CHUNK, samples - start) for start in range(0, samples, _CHUNK)]

    def count(job):
        idx, n = job
        rng = make_rng(seed, idx)
        hs = fading.sample(rng, n)
        hi = fading.sample(rng, n)
        # ACK iff sig*hs >= gamma*(noise + intf*hi); avoids dividing by zero
        return int(np.count_nonzero(sig * hs >= gamma * (noise + intf * hi)))

    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(count, jobs))
    else:
        hits = sum(map(count, jobs))
    return hits / samples
