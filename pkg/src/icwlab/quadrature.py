"""Hubbard-Stratonovich integrals: cumulant generating functions and the auxiliary-field density.

Decoupling the quadratic interaction turns every Gibbs expectation of
``exp(sum_i b_i sigma_i)`` into a one-dimensional integral of
``exp(-n G(y))`` with

    G(y) = y^2/2 - (1/n) sum_i log cosh(a_i y + b_i),

where ``a_i = sqrt(beta/E[W]) w_i`` and ``b_i`` is the (possibly
site-dependent) field.  Integrals are evaluated in ``y``; the returned
log-integrals are for the ``x = sqrt(n) (y - a)`` variable, which differs by
``log sqrt(n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import DimensionError, QuadratureError
from .landau import log_cosh
from .model import ModelParams, require_uniqueness
from .weights import WeightSequence, moments

QUAD_TOL = 1e-12
TAIL_LEVEL = 60.0
_GRID = 4001


class LaplaceIntegrand:
    """G(y) for grouped site coefficients (a_j, b_j) with multiplicities."""

    def __init__(self, a, b, n: int):
        a = np.asarray(a, dtype=float)
        b = np.broadcast_to(np.asarray(b, dtype=float), a.shape)
        pairs, counts = np.unique(np.stack((a, b), axis=1), axis=0, return_counts=True)
        self.a, self.b = pairs[:, 0], pairs[:, 1]
        self.p = counts / float(n)
        self.n = n

    def g(self, y):
        y = np.asarray(y, dtype=float)
        return 0.5 * y * y - log_cosh(np.multiply.outer(y, self.a) + self.b) @ self.p

    def g1(self, y):
        y = np.asarray(y, dtype=float)
        return y - np.tanh(np.multiply.outer(y, self.a) + self.b) @ (self.p * self.a)

    def g2(self, y):
        t = np.tanh(np.multiply.outer(np.asarray(y, dtype=float), self.a) + self.b)
        return 1.0 - (1.0 - t * t) @ (self.p * self.a * self.a)

    def bound(self) -> float:
        """Stationary points satisfy |y| <= sum_j p_j |a_j|."""
        return float(np.abs(self.a) @ self.p)

    def minimize(self):
        """Global minimizer of G by a grid scan refined with a bounded scalar search."""
        b = self.bound()
        if b == 0.0:
            return 0.0, float(self.g(0.0))
        grid = np.linspace(-b - 1e-3, b + 1e-3, _GRID)
        vals = self.g(grid)
        j = int(np.argmin(vals))
        step = grid[1] - grid[0]
        res = optimize.minimize_scalar(
            lambda y: float(self.g(y)), bounds=(grid[j] - step, grid[j] + step),
            method="bounded", options={"xatol": 1e-14},
        )
        y0 = float(res.x)
        # polish with Newton on G'; the bounded search stalls at ~1e-8
        for _ in range(20):
            c = float(self.g2(y0))
            if c <= 0:
                break
            dy = float(self.g1(y0)) / c
            y0 -= dy
            if abs(dy) < 1e-15:
                break
        return y0, float(self.g(y0))


@dataclass
class IntegralResult:
    log_value: float
    mode: float
    g_min: float
    curvature: float
    error_estimate: float
    tail_bound: float
    evaluations: int
    domain: tuple
    scaled_value: float


def _integrate(integrand: LaplaceIntegrand, fn=None, tol: float = QUAD_TOL) -> IntegralResult:
    """log of sqrt(n) * int exp(-n G(y)) [fn(y)] dy over a certified truncated domain.

    Beyond |y| = B the derivative bound G'(y) sign(y) >= |y| - B gives
    G(y) - G_min >= (|y| - B)^2 / 2, so truncating at B + K with
    n K^2 / 2 = TAIL_LEVEL leaves a tail of at most sqrt(2 pi / n) erfc(K sqrt(n/2)).
    """
    n = integrand.n
    y0, gmin = integrand.minimize()
    curv = float(integrand.g2(y0))
    width = 1.0 / math.sqrt(n * max(curv, 1e-6))
    b = integrand.bound()
    k = math.sqrt(2.0 * TAIL_LEVEL / n)
    lo, hi = -b - k, b + k
    # concentrate breakpoints around the mode; the integrand is negligible elsewhere
    pts = [y0 + m * width for m in (-12, -6, -3, -1, 0, 1, 3, 6, 12)]
    pts = sorted(x for x in pts if lo < x < hi)

    def f(y):
        val = math.exp(-n * (float(integrand.g(y)) - gmin))
        return val * fn(y) if fn is not None else val

    val, err, info = integrate.quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=tol,
                                    limit=1000, full_output=True)[:3]
    tail = math.sqrt(2.0 * math.pi / n) * math.erfc(k * math.sqrt(n / 2.0))
    scale = abs(val) if val != 0 else 1.0
    if err > max(1e3 * tol * scale, 1e-14 * scale):
        raise QuadratureError(
            f"adaptive quadrature did not reach tolerance (err={err:.3e}, value={val:.3e})",
            diagnostics={"error": err, "value": val, "evaluations": info["neval"]},
        )
    # with fn the integral may be signed, so its log is left undefined
    log_value = math.log(val) - n * gmin + 0.5 * math.log(n) if fn is None else float("nan")
    return IntegralResult(log_value, y0, gmin, curv, err / scale, tail / scale,
                          int(info["neval"]), (lo, hi), val)


def _coupling(ws: WeightSequence, p: ModelParams) -> np.ndarray:
    return math.sqrt(p.beta / moments(ws, 1)) * ws.values


def log_laplace_integral(ws: WeightSequence, p: ModelParams, s: float = 0.0,
                         per_site_fields: Optional[Sequence[float]] = None,
                         tol: float = QUAD_TOL) -> IntegralResult:
    """log int exp(-n G_n(x/sqrt(n) + a; s)) dx.

    With ``per_site_fields`` the field at site i is ``per_site_fields[i]``
    instead of ``h + s*sqrt(beta/E[W]) w_i``.
    """
    a = _coupling(ws, p)
    if per_site_fields is None:
        b = p.h + s * a
    else:
        b = np.asarray(per_site_fields, dtype=float)
        if b.shape != (ws.n,):
            raise DimensionError(f"expected {ws.n} per-site fields, got shape {b.shape}")
    return _integrate(LaplaceIntegrand(a, b, ws.n), tol=tol)


@dataclass
class CgfResult:
    s: float
    value: float
    second_derivative_at_zero: float
    diagnostics: dict = field(default_factory=dict)


def _closed_form_independent(ws, p, t, s):
    """beta = 0: spins are independent, so c(s) = mean_i[log cosh(h + s t_i) - log cosh h]."""
    return float(np.mean(log_cosh(p.h + s * t) - log_cosh(p.h)))


def _cgf_value(ws, p, t, s, tol):
    if p.beta == 0:
        return _closed_form_independent(ws, p, t, s), {"method": "closed-form"}
    if s == 0:
        return 0.0, {"method": "quadrature"}
    num = log_laplace_integral(ws, p, per_site_fields=p.h + s * t, tol=tol)
    den = log_laplace_integral(ws, p, tol=tol)
    diag = {
        "method": "quadrature",
        "error_estimate": num.error_estimate + den.error_estimate,
        "tail_bound": num.tail_bound + den.tail_bound,
        "evaluations": num.evaluations + den.evaluations,
    }
    return (num.log_value - den.log_value) / ws.n, diag


def _richardson_second(fn, h1=1e-3, h2=5e-4):
    c0 = fn(0.0)

    def d2(hh):
        return (fn(hh) - 2.0 * c0 + fn(-hh)) / (hh * hh)

    # central differences have error ~ h^2; (h1/h2)^2 = 4
    r = (h1 / h2) ** 2
    return (r * d2(h2) - d2(h1)) / (r - 1.0)


def _general_cgf(ws, p, t, s, tol, with_second):
    value, diag = _cgf_value(ws, p, t, s, tol)
    second = float("nan")
    if with_second:
        second = _richardson_second(lambda u: _cgf_value(ws, p, t, u, tol)[0])
    return CgfResult(s=float(s), value=float(value), second_derivative_at_zero=float(second),
                     diagnostics=diag)


def cgf(ws: WeightSequence, p: ModelParams, s: float, tol: float = QUAD_TOL,
        with_second: bool = True) -> CgfResult:
    """c_n(s) = (1/n) log E[exp(s sqrt(beta/E[W]) sum_i w_i sigma_i)]."""
    require_uniqueness(ws, p)
    return _general_cgf(ws, p, _coupling(ws, p), s, tol, with_second)


def cgf_general(ws: WeightSequence, p: ModelParams, t: Sequence[float], s: float,
                tol: float = QUAD_TOL, with_second: bool = True) -> CgfResult:
    """(1/n) log E[exp(s sum_i t_i sigma_i)] for an arbitrary real sequence t."""
    t = np.asarray(t, dtype=float)
    if t.shape != (ws.n,):
        raise DimensionError(f"expected {ws.n} coefficients, got shape {t.shape}")
    require_uniqueness(ws, p)
    return _general_cgf(ws, p, t, s, tol, with_second)


def field_expectation(ws: WeightSequence, p: ModelParams, fn, tol: float = QUAD_TOL) -> float:
    """E[fn(Y)] where Y is the auxiliary field in the y-scale (density prop. to exp(-n G_n(y)))."""
    integrand = LaplaceIntegrand(_coupling(ws, p), p.h, ws.n)
    norm = _integrate(integrand, tol=tol)
    # both integrals subtract the same G_min, so the ratio needs no rescaling
    return _integrate(integrand, fn=fn, tol=tol).scaled_value / norm.scaled_value


def site_means(ws: WeightSequence, p: ModelParams, tol: float = QUAD_TOL) -> np.ndarray:
    """Exact E[sigma_i] via E[tanh(sqrt(beta/E[W]) w_i Y + h)] over the auxiliary field."""
    a = _coupling(ws, p)
    if p.beta == 0:
        return np.full(ws.n, math.tanh(p.h))
    uniq, inv = np.unique(a, return_inverse=True)
    vals = np.array([field_expectation(ws, p, lambda y, ai=ai: math.tanh(ai * y + p.h), tol)
                     for ai in uniq])
    return vals[inv]


def cgf_first_derivative_at_zero(ws: WeightSequence, p: ModelParams) -> float:
    """c_n'(0) = E[(1/n) sqrt(beta/E[W]) sum_i w_i sigma_i] = E[Y - G_n'(Y)]."""
    require_uniqueness(ws, p)
    a = _coupling(ws, p)
    return float(np.mean(a * site_means(ws, p)))


class HSDensity:
    """Tabulated density of the auxiliary field z = sqrt(n) y, with an inverse-CDF table."""

    def __init__(self, ws: WeightSequence, p: ModelParams, nodes: int = 2**14,
                 tol: float = QUAD_TOL):
        require_uniqueness(ws, p)
        self.n = ws.n
        self.coupling = _coupling(ws, p)
        self.h = p.h
        self._integrand = LaplaceIntegrand(self.coupling, p.h, ws.n)
        res = _integrate(self._integrand, tol=tol)
        self.log_norm = res.log_value  # log int exp(-n G(z/sqrt(n))) dz
        self.mode_z = res.mode * math.sqrt(self.n)
        # support where n (G - G_min) <= TAIL_LEVEL, located on a coarse grid
        lo, hi = res.domain
        coarse = np.linspace(lo, hi, 8 * nodes)
        keep = np.flatnonzero(self.n * (self._integrand.g(coarse) - res.g_min) <= TAIL_LEVEL)
        step = coarse[1] - coarse[0]
        ylo, yhi = coarse[keep[0]] - step, coarse[keep[-1]] + step
        self.z = np.linspace(ylo, yhi, nodes) * math.sqrt(self.n)
        self.pdf_values = self.pdf(self.z)
        cdf = integrate.cumulative_simpson(self.pdf_values, x=self.z, initial=0.0)
        self.table_mass = float(cdf[-1])
        self.tail_mass = max(0.0, 1.0 - self.table_mass)
        cdf = np.maximum.accumulate(cdf / cdf[-1])
        strict = np.concatenate(([True], np.diff(cdf) > 0))
        self._inverse = PchipInterpolator(cdf[strict], self.z[strict])
        self.cdf_values = cdf

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        y = z / math.sqrt(self.n)
        return np.exp(-self.n * self._integrand.g(y) - self.log_norm)

    def total_mass(self, tol: float = 1e-12) -> float:
        lo, hi = self.z[0], self.z[-1]
        pts = [self.mode_z]
        return integrate.quad(lambda z: float(self.pdf(z)), lo, hi, points=pts,
                              epsabs=0.0, epsrel=tol, limit=500)[0]

    def ppf(self, u):
        return self._inverse(np.clip(u, 0.0, 1.0))

    def sample(self, rng, size) -> np.ndarray:
        return self.ppf(rng.random(size))


def hs_density(ws: WeightSequence, p: ModelParams, nodes: int = 2**14) -> HSDensity:
    return HSDensity(ws, p, nodes=nodes)
