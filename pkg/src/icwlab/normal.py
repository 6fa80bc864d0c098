"""Standard normal CDF and Kolmogorov distance of a discrete law to N(0, 1)."""
from __future__ import annotations

import numpy as np
from scipy import special

SQRT2 = np.sqrt(2.0)


def norm_cdf(x):
    """Phi(x) with Phi(-x) = 1 - Phi(x) enforced exactly.

    The lower tail comes from erfc, so relative accuracy is kept for x << 0.
    """
    x = np.asarray(x, dtype=float)
    lower = 0.5 * special.erfc(np.abs(x) / SQRT2)
    out = np.where(x <= 0, lower, 1.0 - lower)
    return out if out.ndim else float(out)


def norm_sf(x):
    """1 - Phi(x)."""
    return norm_cdf(-np.asarray(x, dtype=float))


def scaled_lower(x):
    """exp(x^2/2) * Phi(x), finite for all x <= ~37."""
    return 0.5 * special.erfcx(-np.asarray(x, dtype=float) / SQRT2)


def scaled_upper(x):
    """exp(x^2/2) * (1 - Phi(x))."""
    return 0.5 * special.erfcx(np.asarray(x, dtype=float) / SQRT2)


def kolmogorov_distance(atoms, probs) -> float:
    """sup_z |F(z) - Phi(z)| for a discrete law with the given atoms and masses.

    The supremum is attained at an atom, approached either from the right
    (F(a)) or from the left (F(a-)).
    """
    atoms = np.asarray(atoms, dtype=float).ravel()
    probs = np.asarray(probs, dtype=float).ravel()
    if atoms.shape != probs.shape:
        raise ValueError("atoms and probs must have the same length")
    order = np.argsort(atoms, kind="stable")
    a, pr = atoms[order], probs[order]
    uniq, start = np.unique(a, return_index=True)
    mass = np.add.reduceat(pr, start) if pr.size else pr
    cdf_right = np.cumsum(mass)
    cdf_left = cdf_right - mass
    phi = norm_cdf(uniq)
    return float(max(np.max(np.abs(cdf_right - phi)), np.max(np.abs(cdf_left - phi))))
