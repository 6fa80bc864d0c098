"""Vertex weight sequences and their limit laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import SizeError

MAX_N = 1_000_000
_SCALE_TOL = 1e-12
_MAX_DENOMINATOR = 10**6


def _is_integral_scale(q: int, values: np.ndarray) -> bool:
    scaled = q * values
    return bool(np.max(np.abs(scaled - np.rint(scaled))) <= _SCALE_TOL * max(1.0, float(np.max(scaled))))


def _detect_scale(values: np.ndarray) -> Optional[int]:
    """Smallest q with q*w_i integral for every i, or None if no small q exists."""
    q = 1
    for v in np.unique(values):
        frac = Fraction(float(v)).limit_denominator(_MAX_DENOMINATOR)
        q = q * frac.denominator // math.gcd(q, frac.denominator)
        if q > _MAX_DENOMINATOR:
            return None
    return q if _is_integral_scale(q, values) else None


@dataclass(frozen=True)
class WeightSequence:
    """Positive vertex weights ``w_1..w_n``.

    ``integer_scale`` is a positive integer ``q`` with ``q*w_i`` integral for all
    ``i``; it is detected automatically for rational weights with small
    denominators and is what enables the exact lattice computation.
    """

    values: np.ndarray
    integer_scale: Optional[int] = None

    def __init__(self, values: Iterable[float], integer_scale: Optional[int] = None,
                 detect_scale: bool = True):
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                         dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("weight sequence must be non-empty")
        if arr.size > MAX_N:
            raise SizeError(f"n={arr.size} exceeds the maximum {MAX_N}")
        bad = np.flatnonzero(~np.isfinite(arr) | (arr <= 0))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"weight at index {i} is {arr[i]!r}; weights must be finite and > 0")
        if integer_scale is not None:
            q = int(integer_scale)
            if q < 1:
                raise ValueError("integer_scale must be a positive integer")
            if not _is_integral_scale(q, arr):
                raise ValueError(f"integer_scale {q} does not make all weights integral")
        elif detect_scale:
            q = _detect_scale(arr)
        else:
            q = None
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "integer_scale", q)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def total(self) -> float:
        """l_n, the sum of all weights."""
        return float(np.sum(self.values))

    def scaled_integers(self) -> np.ndarray:
        """``q*w_i`` as integers; requires an integer scale."""
        if self.integer_scale is None:
            raise ValueError("weights have no integer scale")
        return np.rint(self.integer_scale * self.values).astype(np.int64)

    def law(self) -> "WeightLaw":
        """Empirical law of W_n = w_I with I uniform on [n]."""
        vals, counts = np.unique(self.values, return_counts=True)
        return WeightLaw(list(zip(vals.tolist(), (counts / self.n).tolist())))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightSequence):
            return NotImplemented
        return self.integer_scale == other.integer_scale and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.values.tobytes(), self.integer_scale))

    def __repr__(self) -> str:
        return f"WeightSequence(n={self.n}, q={self.integer_scale}, values={self.values.tolist()[:8]}{'...' if self.n > 8 else ''})"


@dataclass(frozen=True)
class WeightLaw:
    """A finitely supported law of a positive random variable W."""

    atoms: tuple = field()

    def __init__(self, atoms: Sequence[tuple]):
        pairs = [(float(v), float(p)) for v, p in atoms]
        if not pairs:
            raise ValueError("a weight law needs at least one atom")
        for v, p in pairs:
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"atom value {v!r} must be finite and > 0")
            if not (0 < p <= 1):
                raise ValueError(f"atom probability {p!r} must lie in (0, 1]")
        total = math.fsum(p for _, p in pairs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", tuple(pairs))

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    def moment(self, k: int) -> float:
        return math.fsum(p * v**k for v, p in self.atoms)


def as_law(obj) -> WeightLaw:
    """Accept either a WeightLaw or a WeightSequence (via its empirical law)."""
    if isinstance(obj, WeightLaw):
        return obj
    if isinstance(obj, WeightSequence):
        return obj.law()
    raise TypeError(f"expected WeightLaw or WeightSequence, got {type(obj).__name__}")


def moments(ws: WeightSequence, k: int) -> float:
    """Empirical moment (1/n) * sum_i w_i**k for k in {1, 2, 3}."""
    if k not in (1, 2, 3):
        raise ValueError(f"moment order must be 1, 2 or 3, got {k}")
    vals, counts = np.unique(ws.values, return_counts=True)
    # exact rational mean so replicated sequences agree bit-for-bit with their base
    total = sum((int(c) * Fraction(float(v) ** k) for v, c in zip(vals, counts)), Fraction(0))
    return float(total / ws.n)


def replicate(base: WeightSequence, k: int, max_n: int = MAX_N) -> WeightSequence:
    """Concatenate ``k`` copies of ``base``; empirical moments are unchanged."""
    if k < 1:
        raise ValueError(f"replication factor must be >= 1, got {k}")
    if k * base.n > max_n:
        raise SizeError(f"replicated size {k * base.n} exceeds the maximum {max_n}")
    return WeightSequence(np.tile(base.values, k), integer_scale=base.integer_scale)


def for_size(base: WeightSequence, n: int) -> WeightSequence:
    """Replicate ``base`` up to exactly ``n`` vertices; ``n`` must be a multiple of base.n."""
    if n % base.n:
        raise SizeError(f"n={n} is not a multiple of the base length {base.n}")
    return replicate(base, n // base.n)


def critical_beta(law) -> float:
    """beta_c = E[W] / E[W^2]."""
    law = as_law(law)
    return law.moment(1) / law.moment(2)
