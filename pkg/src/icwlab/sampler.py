"""Exact Gibbs sampling through the auxiliary field, and the heat-bath (Glauber) kernel.

All randomness flows through numpy's Philox4x32-10 counter-based generator,
keyed by ``seed XOR chain_index``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, as_configuration
from .quadrature import HSDensity, hs_density
from .weights import WeightSequence, moments

METHODS = ("auxiliary-field", "glauber-chain")


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    key = (int(seed) ^ int(chain_index)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key))


@dataclass
class SampleBatch:
    configurations: np.ndarray  # (count, n) int8
    seed: int
    method: str

    def statistics(self, ws: WeightSequence):
        """Per-sample (S, q*T) when weights are integral-scaled, else (S, T)."""
        s = self.configurations.sum(axis=1, dtype=np.int64)
        t = self.configurations.astype(float) @ ws.values
        if ws.integer_scale is not None:
            t = np.rint(t * ws.integer_scale).astype(np.int64)
        return s, t


@dataclass
class PairSample:
    cfg: np.ndarray
    site: int
    resampled_spin: int

    def partner(self) -> np.ndarray:
        out = self.cfg.copy()
        out[self.site] = self.resampled_spin
        return out


def _fields_given_z(ws: WeightSequence, p: ModelParams, z: np.ndarray) -> np.ndarray:
    k = math.sqrt(p.beta / moments(ws, 1))
    return np.multiply.outer(z / math.sqrt(ws.n), k * ws.values) + p.h


def sample_exact(ws: WeightSequence, p: ModelParams, count: int, seed: int,
                 density: HSDensity | None = None, chunk: int = 200_000) -> SampleBatch:
    """I.i.d. Gibbs configurations: draw the auxiliary field, then independent spins."""
    rng = make_rng(seed)
    if p.beta > 0 and density is None:
        density = hs_density(ws, p)
    out = np.empty((count, ws.n), dtype=np.int8)
    for start in range(0, count, chunk):
        m = min(chunk, count - start)
        z = density.sample(rng, m) if p.beta > 0 else np.zeros(m)
        # P(sigma_i = +1 | z) = (1 + tanh(field_i)) / 2
        prob_up = 0.5 * (1.0 + np.tanh(_fields_given_z(ws, p, z)))
        out[start:start + m] = np.where(rng.random((m, ws.n)) < prob_up, 1, -1)
    return SampleBatch(out, int(seed), "auxiliary-field")


def glauber_conditional_mean(ws: WeightSequence, p: ModelParams, cfg, i: int) -> float:
    """E[sigma_i | all other spins] = tanh(beta w_i m~_n^i / E[W_n] + h)."""
    cfg = as_configuration(cfg, ws.n)
    if not 0 <= i < ws.n:
        raise IndexError(f"site {i} out of range for n={ws.n}")
    w = ws.values
    m_tilde_i = (float(cfg.astype(float) @ w) - w[i] * cfg[i]) / ws.n
    return math.tanh(p.beta * w[i] * m_tilde_i / moments(ws, 1) + p.h)


def conditional_means(ws: WeightSequence, p: ModelParams, cfgs: np.ndarray) -> np.ndarray:
    """Vectorized conditional means for every site of every row of ``cfgs``."""
    w = ws.values
    c = np.asarray(cfgs, dtype=float)
    m_tilde = (c @ w)[..., None] / ws.n
    m_tilde_i = m_tilde - w * c / ws.n
    return np.tanh(p.beta * w * m_tilde_i / moments(ws, 1) + p.h)


def glauber_step(ws: WeightSequence, p: ModelParams, cfg, rng: np.random.Generator) -> PairSample:
    """Pick a uniform site and resample its spin from the conditional law."""
    cfg = as_configuration(cfg, ws.n)
    i = int(rng.integers(ws.n))
    mean = glauber_conditional_mean(ws, p, cfg, i)
    spin = 1 if rng.random() < 0.5 * (1.0 + mean) else -1
    return PairSample(cfg.copy(), i, spin)


def glauber_run(ws: WeightSequence, p: ModelParams, cfgs: np.ndarray, steps: int,
                rng: np.random.Generator, record_s: bool = False):
    """Advance many independent chains (rows of ``cfgs``) by ``steps`` heat-bath updates.

    Returns the final configurations, and the trajectory of S if requested.
    """
    c = np.array(cfgs, dtype=np.int8, copy=True)
    m, n = c.shape
    w = ws.values
    scale = p.beta / moments(ws, 1)
    t = c.astype(float) @ w
    rows = np.arange(m)
    traj = np.empty((steps, m), dtype=np.int64) if record_s else None
    for step in range(steps):
        sites = rng.integers(n, size=m)
        u = rng.random(m)
        old = c[rows, sites].astype(float)
        wi = w[sites]
        m_tilde_i = (t - wi * old) / n
        prob_up = 0.5 * (1.0 + np.tanh(scale * wi * m_tilde_i + p.h))
        new = np.where(u < prob_up, 1, -1).astype(np.int8)
        t += wi * (new - old)
        c[rows, sites] = new
        if record_s:
            traj[step] = c.sum(axis=1, dtype=np.int64)
    return (c, traj) if record_s else c


def sample_glauber(ws: WeightSequence, p: ModelParams, count: int, seed: int,
                   burn_in: int | None = None, thin: int | None = None) -> SampleBatch:
    """One chain from the exact sampler's draw, thinned after burn-in (defaults 10n, n)."""
    n = ws.n
    burn_in = 10 * n if burn_in is None else burn_in
    thin = n if thin is None else thin
    start = sample_exact(ws, p, 1, seed).configurations
    rng = make_rng(seed, 1)
    c = glauber_run(ws, p, start, burn_in, rng)
    out = np.empty((count, n), dtype=np.int8)
    for j in range(count):
        c = glauber_run(ws, p, c, thin, rng)
        out[j] = c[0]
    return SampleBatch(out, int(seed), "glauber-chain")
