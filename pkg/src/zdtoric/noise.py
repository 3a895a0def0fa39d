"""Generalized bit-flip channel and per-edge qudit distributions.

A noise model is a categorical distribution over X-exponents {0, .., d-1}
for every edge of the current-level lattice.  Level-0 models are i.i.d.
bit-flip; renormalization rounds replace them with per-edge marginals
produced by cell marginalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NORM_TOL = 1e-12


class DegenerateDistributionError(RuntimeError):
    """Every candidate error has probability zero under the noise model."""


def bitflip_distribution(d: int, p_phys: float) -> np.ndarray:
    """Single-qudit generalized bit-flip distribution.

    With probability 1 - p_phys the qudit is unaffected; with probability
    p_phys one of X, X^2, ..., X^(d-1) is applied uniformly at random.
    """
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    if not 0.0 <= p_phys <= 1.0:
        raise ValueError(f"p_phys must lie in [0, 1], got {p_phys}")
    probs = np.full(d, p_phys / (d - 1))
    probs[0] = 1.0 - p_phys
    return probs


def depolarizing_bitflip_rate(q: float, d: int) -> float:
    """Bit-flip rate equivalent to a depolarizing channel of strength q.

    Treating X and Z errors independently, depolarizing with rate q acts
    on the X sector like a bit-flip channel with p_phys = q * (1 - 1/d).
    """
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return q * (1.0 - 1.0 / d)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-edge categorical distributions over X-exponents.

    ``probs`` has shape (n_edges, d); row e holds P(exponent = k) for
    edge e.  Rows must be normalized.  Instances are immutable and safe
    to share between parallel workers.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] < 2:
            raise ValueError(f"probs must be (n_edges, d>=2), got {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("negative probability entry")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > _NORM_TOL):
            raise ValueError("per-edge distributions must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_edges(self) -> int:
        return self.probs.shape[0]

    @property
    def d(self) -> int:
        return self.probs.shape[1]


def iid_bitflip(n_edges: int, d: int, p_phys: float) -> NoiseModel:
    """Independent identical bit-flip noise on every edge."""
    row = bitflip_distribution(d, p_phys)
    return NoiseModel(np.tile(row, (n_edges, 1)))


def sample_error(noise: NoiseModel, rng_seed) -> np.ndarray:
    """Draw one error: each edge's exponent sampled from its distribution.

    ``rng_seed`` may be anything accepted by ``numpy.random.default_rng``
    (an int, a SeedSequence, or a Generator); the draw is deterministic
    given the seed.
    """
    rng = np.random.default_rng(rng_seed)
    cdf = np.cumsum(noise.probs, axis=1)
    u = rng.random(noise.n_edges)
    exponents = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(exponents, noise.d - 1).astype(np.int64)


def log_probability(noise: NoiseModel, op) -> float:
    """Log-probability of an exponent vector; -inf if any edge is impossible."""
    exps = np.asarray(op, dtype=np.int64)
    if exps.shape != (noise.n_edges,):
        raise ValueError(f"length mismatch: {exps.shape} vs {noise.n_edges} edges")
    per_edge = noise.probs[np.arange(noise.n_edges), exps % noise.d]
    if np.any(per_edge == 0.0):
        return float("-inf")
    return float(np.log(per_edge).sum())
