"""Gibbs measure of the inhomogeneous Curie-Weiss model.

The measure depends on a configuration only through the sufficient statistics
``S = sum_i sigma_i`` and ``T = sum_i w_i sigma_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RegimeError
from .weights import WeightSequence, as_law, critical_beta


@dataclass(frozen=True)
class ModelParams:
    beta: float
    h: float = 0.0

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta!r}")
        if not math.isfinite(self.h):
            raise ValueError(f"h must be finite, got {self.h!r}")


def as_configuration(spins, n: int | None = None) -> np.ndarray:
    """Validate a spin configuration (or a batch, one per row) and return an int8 array."""
    arr = np.asarray(spins)
    if arr.size and not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spins must be exactly -1 or +1")
    if n is not None and arr.shape[-1] != n:
        raise DimensionError(f"configuration length {arr.shape[-1]} does not match n={n}")
    return arr.astype(np.int8)


def sufficient_statistics(ws: WeightSequence, spins) -> tuple:
    """Return (S, T) for one configuration or arrays of them for a batch."""
    cfg = as_configuration(spins, ws.n)
    s = cfg.sum(axis=-1, dtype=np.int64)
    t = cfg.astype(float) @ ws.values
    return s, t


def log_gibbs_weight(ws: WeightSequence, p: ModelParams, S, T):
    """Unnormalized log-weight beta*T^2/(2 l_n) + h*S."""
    return p.beta * np.square(T) / (2.0 * ws.total) + p.h * np.asarray(S)


def hamiltonian(ws: WeightSequence, p: ModelParams, spins):
    S, T = sufficient_statistics(ws, spins)
    return -log_gibbs_weight(ws, p, S, T)


def in_uniqueness_regime(law, p: ModelParams) -> bool:
    """True iff h != 0, or h == 0 and 0 < beta < beta_c."""
    if p.h != 0:
        return True
    return 0 < p.beta < critical_beta(as_law(law))


def require_uniqueness(law, p: ModelParams) -> None:
    if not in_uniqueness_regime(law, p):
        bc = critical_beta(as_law(law))
        raise RegimeError(
            f"(beta={p.beta}, h={p.h}) lies outside the uniqueness regime (beta_c={bc!r})",
            beta_c=bc,
        )
