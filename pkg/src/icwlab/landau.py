"""The function G_n(x; s), its fixed point and the scalar observables built on it.

All functions take a weight law (or a weight sequence, which is reduced to its
empirical law) and work with the coupling ``k = sqrt(beta / E[W])``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegeneracyError, SolverError
from .model import ModelParams, require_uniqueness
from .weights import as_law, critical_beta

FIXED_POINT_TOL = 1e-13
DEGENERACY_TOL = 1e-8
_MAX_ITER = 200


def log_cosh(u):
    """log(cosh(u)) without overflow for large |u|."""
    a = np.abs(u)
    large = a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)
    # cosh u - 1 = 2 sinh^2(u/2) keeps full relative accuracy near 0
    small = np.log1p(2.0 * np.sinh(0.5 * np.minimum(a, 1.0)) ** 2)
    return np.where(a < 1.0, small, large)


def _law_arrays(law, p: ModelParams):
    law = as_law(law)
    v, w = law.values, law.probs
    mean = law.moment(1)
    return v, w, math.sqrt(p.beta / mean), mean


def g(law, p: ModelParams, x, s=0.0):
    """G_n(x; s) = x^2/2 - E[log cosh(k W (x+s) + h)]."""
    v, w, k, _ = _law_arrays(law, p)
    x = np.asarray(x, dtype=float)
    u = k * np.multiply.outer(x + s, v) + p.h
    out = 0.5 * x * x - log_cosh(u) @ w
    return out if out.ndim else float(out)


def g_deriv(law, p: ModelParams, x, order: int, s: float = 0.0):
    """Analytic derivative of G_n(.; s) of order 1, 2 or 3 at x."""
    v, w, k, _ = _law_arrays(law, p)
    x = np.asarray(x, dtype=float)
    t = np.tanh(k * np.multiply.outer(x + s, v) + p.h)
    if order == 1:
        out = x - (t * (k * v)) @ w
    elif order == 2:
        out = 1.0 - ((1.0 - t * t) * (k * v) ** 2) @ w
    elif order == 3:
        out = 2.0 * (t * (1.0 - t * t) * (k * v) ** 3) @ w
    else:
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    return out if out.ndim else float(out)


def stationary_bound(law, p: ModelParams) -> float:
    """Every stationary point of G_n lies in [-B, B] with B = k E[W]."""
    v, w, k, _ = _law_arrays(law, p)
    return float(k * (v @ w))


def is_global_minimizer(law, p: ModelParams, x_star: float, num: int = 4001) -> bool:
    """Scan G_n on a grid covering all stationary points; no point may undercut x_star.

    Outside [-B, B] G_n is monotone towards infinity, so the grid on
    [-B - 1, B + 1] suffices.
    """
    b = stationary_bound(law, p) + 1.0
    grid = np.linspace(-b, b, num)
    vals = g(law, p, grid)
    g_star = g(law, p, x_star)
    j = int(np.argmin(vals))
    if vals[j] >= g_star - 1e-12:
        return True
    # a lower grid value is acceptable only if it sits in the basin of x_star
    step = grid[1] - grid[0]
    return abs(grid[j] - x_star) <= 2 * step


def solve_fixed_point(law, p: ModelParams, tol: float = FIXED_POINT_TOL,
                      check_regime: bool = True) -> float:
    """Root of G_n' with the sign of h (zero when h = 0).

    Bisection on the sign-definite bracket [0, B] (mirrored for h < 0), then
    safeguarded Newton steps until |G_n'| <= tol.
    """
    law = as_law(law)
    if check_regime:
        require_uniqueness(law, p)
    if p.beta == 0 or p.h == 0:
        return 0.0
    v, w, k, _ = _law_arrays(law, p)
    sign = 1.0 if p.h > 0 else -1.0
    big_b = k * (v @ w) + abs(p.h)

    def d1(x):
        return g_deriv(law, p, x, 1)

    lo, hi = (0.0, big_b) if sign > 0 else (-big_b, 0.0)
    f_lo, f_hi = d1(lo), d1(hi)
    if (f_lo if sign > 0 else f_hi) == 0.0:
        # |h| so small that G'(0) underflows: the root is 0 to working precision
        return 0.0
    if not (f_lo < 0 < f_hi):
        raise SolverError(f"G' does not change sign on [{lo}, {hi}]: {f_lo}, {f_hi}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f_mid = d1(mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if f_mid < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < 1e-6 * max(1.0, abs(mid)):
            break
    # secant point of the final bracket: a product, so a root near 0 keeps its relative accuracy
    if f_hi > f_lo:
        anchor, f_anchor = (lo, f_lo) if abs(lo) <= abs(hi) else (hi, f_hi)
        x = anchor - f_anchor * (hi - lo) / (f_hi - f_lo)
    else:
        x = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        fx = d1(x)
        if abs(fx) <= tol:
            break
        if fx < 0:
            lo = x
        else:
            hi = x
        step = fx / g_deriv(law, p, x, 2)
        x_new = x - step
        if not (lo <= x_new <= hi) or not math.isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
    else:
        raise SolverError(f"fixed point not converged after {_MAX_ITER} iterations")
    if abs(d1(x)) > max(tol, 1e-12):
        raise SolverError(f"fixed point residual {d1(x):.3e} exceeds tolerance")
    if not is_global_minimizer(law, p, x):
        raise SolverError(f"fixed point {x} is not the global minimizer of G_n")
    return float(x)


@dataclass(frozen=True)
class Observables:
    x_star: float
    m_n_inf: float
    m_tilde: float
    chi: float
    chi_tilde: float
    sigma_sq: float
    c_coef: float
    lambda_: float
    beta_c: float
    g2: float
    n: int
    beta: float
    h: float

    def as_dict(self) -> dict:
        return asdict(self)


def observables(law, p: ModelParams, n: int, check_regime: bool = True) -> Observables:
    """Fixed point, finite-size magnetizations, susceptibilities and regression constants."""
    law = as_law(law)
    x_star = solve_fixed_point(law, p, check_regime=check_regime)
    v, w, k, mean = _law_arrays(law, p)
    t = np.tanh(k * v * x_star + p.h)
    sech2 = 1.0 - t * t
    a1 = (sech2 * v) @ w
    a2 = (sech2 * v * v) @ w
    g2 = 1.0 - (p.beta / mean) * a2
    if g2 < DEGENERACY_TOL:
        raise DegeneracyError(
            f"G_n''(x*) = {g2:.3e} below {DEGENERACY_TOL:g}; parameters are too close to criticality"
        )
    chi = 1.0 - (t * t) @ w + (p.beta / mean) * a1 * a1 / g2
    sigma_sq = 1.0 / g2
    chi_tilde = sigma_sq * a2
    c_coef = math.sqrt(chi_tilde / chi) * (p.beta / mean) * a1
    return Observables(
        x_star=x_star,
        m_n_inf=float(t @ w),
        m_tilde=float((t * v) @ w),
        chi=float(chi),
        chi_tilde=float(chi_tilde),
        sigma_sq=float(sigma_sq),
        c_coef=float(c_coef),
        lambda_=1.0 / n,
        beta_c=critical_beta(law),
        g2=float(g2),
        n=int(n),
        beta=p.beta,
        h=p.h,
    )
