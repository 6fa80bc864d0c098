"""Exact joint law of (S, T) = (sum sigma_i, sum w_i sigma_i) under the Gibbs measure."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import RepresentationError, SizeError
from .landau import Observables
from .model import ModelParams, log_gibbs_weight
from .normal import kolmogorov_distance
from .weights import WeightSequence

MAX_ENUMERATE_N = 24
DP_BUDGET = 50_000_000


@dataclass(frozen=True)
class JointDistribution:
    """Normalized law of (S, T) on its attainable support.

    ``t_index`` holds ``q*T`` as integers when the weights carry an integer
    scale ``q``; otherwise it is None and ``t`` is the only representation.
    """

    s: np.ndarray
    t: np.ndarray
    log_mass: np.ndarray
    n: int
    q: Optional[int]
    weights: WeightSequence
    t_index: Optional[np.ndarray] = None

    @property
    def mass(self) -> np.ndarray:
        return np.exp(self.log_mass)

    def expect(self, fn) -> float:
        """E[fn(S, T)]."""
        return float(np.sum(self.mass * fn(self.s, self.t)))

    def log_mgf_t(self, theta: float) -> float:
        """log E[exp(theta * T)]."""
        return float(logsumexp(self.log_mass + theta * self.t))

    def marginal_s(self):
        vals, inv = np.unique(self.s, return_inverse=True)
        return vals, np.bincount(inv, weights=self.mass)

    def marginal_t(self):
        key = self.t_index if self.t_index is not None else self.t
        vals, first, inv = np.unique(key, return_index=True, return_inverse=True)
        return self.t[first], np.bincount(inv, weights=self.mass)

    def lookup(self) -> dict:
        """Map (S, q*T) (or (S, T) without scale) to log-mass."""
        key = self.t_index if self.t_index is not None else self.t
        return {(int(a), b.item()): float(c) for a, b, c in zip(self.s, key, self.log_mass)}


def _finish(ws: WeightSequence, p: ModelParams, s, t_index, log_count, q):
    t = t_index / q if q is not None else t_index
    logw = log_count + log_gibbs_weight(ws, p, s, t)
    logw = logw - logsumexp(logw)
    order = np.lexsort((t, s))
    return JointDistribution(
        s=s[order], t=t[order], log_mass=logw[order], n=ws.n, q=q, weights=ws,
        t_index=t_index[order] if q is not None else None,
    )


def configurations(n: int) -> np.ndarray:
    """All 2^n spin configurations as rows of an int8 array."""
    if n > MAX_ENUMERATE_N:
        raise SizeError(f"enumeration limited to n <= {MAX_ENUMERATE_N}, got n={n}")
    return np.array(list(itertools.product((1, -1), repeat=n)), dtype=np.int8)


def configuration_log_probs(ws: WeightSequence, p: ModelParams, cfgs: np.ndarray) -> np.ndarray:
    """Normalized log Gibbs probabilities of the rows of ``cfgs`` (assumed to be all of {-1,1}^n)."""
    s = cfgs.sum(axis=1, dtype=np.int64)
    t = cfgs.astype(float) @ ws.values
    logw = log_gibbs_weight(ws, p, s, t)
    return logw - logsumexp(logw)


def enumerate_law(ws: WeightSequence, p: ModelParams) -> JointDistribution:
    """Brute force over all 2^n configurations, aggregated by (S, T)."""
    n = ws.n
    if n > MAX_ENUMERATE_N:
        raise SizeError(f"enumeration limited to n <= {MAX_ENUMERATE_N}, got n={n}")
    q = ws.integer_scale
    s = np.zeros(1, dtype=np.int64)
    if q is not None:
        a = ws.scaled_integers()
        t = np.zeros(1, dtype=np.int64)
    else:
        a = ws.values
        t = np.zeros(1)
    for i in range(n):
        s = np.concatenate((s + 1, s - 1))
        t = np.concatenate((t + a[i], t - a[i]))
    if q is not None:
        keys = np.stack((s, t), axis=1)
    else:
        keys = np.stack((s.astype(float), np.round(t, 12)), axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    s_u = uniq[:, 0].astype(np.int64)
    t_u = uniq[:, 1] if q is not None else uniq[:, 1].astype(float)
    return _finish(ws, p, s_u, t_u, np.log(counts.astype(float)), q)


def dp_joint(ws: WeightSequence, p: ModelParams, budget: int = DP_BUDGET) -> JointDistribution:
    """Exact law by a vertex-by-vertex log-space convolution on the (S, q*T) lattice."""
    q = ws.integer_scale
    if q is None:
        raise RepresentationError("lattice DP needs rational weights with an integer scale")
    n = ws.n
    a = ws.scaled_integers()
    big_q = int(a.sum())
    width = 2 * big_q + 1
    if (n + 1) * width > budget:
        raise SizeError(f"lattice of {(n + 1) * width} cells exceeds the budget {budget}")
    # rows: number of up spins; columns: q*T + big_q
    table = np.full((n + 1, width), -np.inf)
    table[0, big_q] = 0.0
    for i in range(n):
        ai = int(a[i])
        new = np.full_like(table, -np.inf)
        new[:, : width - ai] = table[:, ai:] - p.h if ai else table - p.h
        up = np.full_like(table, -np.inf)
        up[1:, ai:] = table[:-1, : width - ai] + p.h
        table = np.logaddexp(new, up)
    ups, cols = np.nonzero(np.isfinite(table))
    s = 2 * ups.astype(np.int64) - n
    t_index = cols.astype(np.int64) - big_q
    # the +-h per-site factors already carry h*S; only the interaction term remains
    logw = table[ups, cols] + p.beta * np.square(t_index / q) / (2.0 * ws.total)
    logw = logw - logsumexp(logw)
    order = np.lexsort((t_index, s))
    return JointDistribution(
        s=s[order], t=(t_index / q)[order], log_mass=logw[order], n=n, q=q, weights=ws,
        t_index=t_index[order],
    )


def exact_law(ws: WeightSequence, p: ModelParams) -> JointDistribution:
    """DP when the weights are rational, enumeration otherwise."""
    if ws.integer_scale is not None:
        return dp_joint(ws, p)
    return enumerate_law(ws, p)


@dataclass(frozen=True)
class MarginalSummary:
    mean: float
    variance: float
    mu3: float
    mu4: float
    d_k: float
    mean_tilde: float
    variance_tilde: float
    mu3_tilde: float
    mu4_tilde: float
    d_k_tilde: float


def _moments(x, pr):
    mean = float(np.sum(pr * x))
    d = x - mean
    return mean, float(np.sum(pr * d**2)), float(np.sum(pr * d**3)), float(np.sum(pr * d**4))


def standardized_atoms(jd: JointDistribution, obs: Observables):
    """Atoms and masses of X_n and of the weighted analogue."""
    n = jd.n
    s_vals, s_mass = jd.marginal_s()
    t_vals, t_mass = jd.marginal_t()
    x = math.sqrt(n) * (s_vals / n - obs.m_n_inf) / math.sqrt(obs.chi)
    xt = math.sqrt(n) * (t_vals / n - obs.m_tilde) / math.sqrt(obs.chi_tilde)
    return (x, s_mass), (xt, t_mass)


def standardize(jd: JointDistribution, obs: Observables) -> MarginalSummary:
    """Exact central moments and Kolmogorov distances of both standardized marginals."""
    (x, px), (xt, pt) = standardized_atoms(jd, obs)
    m = _moments(x, px)
    mt = _moments(xt, pt)
    return MarginalSummary(
        *m, kolmogorov_distance(x, px),
        *mt, kolmogorov_distance(xt, pt),
    )
