"""Exit criteria of the laboratory, runnable from the CLI (``accept``) and from pytest.

Each check returns a :class:`CriterionResult`; ``run_all`` prints one line per
criterion.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exactdist import dp_joint, enumerate_law, standardize
from .landau import observables
from .model import ModelParams
from .normal import scaled_lower, scaled_upper
from .quadrature import cgf
from .sampler import glauber_run, make_rng, sample_exact
from .stein import (MAX_EXACT_N, bound_terms, exact_errorterm_bounds, stein_f,
                    verify_regression)
from .weights import WeightSequence, critical_beta, for_size, moments

HOMOGENEOUS = (1.0,)
TWO_POINT = (1.0, 1.0, 2.0, 2.0)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s) {self.detail.get('summary', '')}"


def _ws(base, n):
    return for_size(WeightSequence(base), n)


def stein_majorization() -> CriterionResult:
    """Exact d_K(X_n, Z) <= T1 + T2 + T3 on the small-n grid."""
    rows, ok, worst = [], True, math.inf
    for base in (HOMOGENEOUS, TWO_POINT):
        bc = critical_beta(WeightSequence(base))
        for n in (8, 12):
            ws = _ws(base, n)
            for beta, h in ((0.5 * bc, 0.0), (0.5 * bc, 0.3), (1.5 * bc, 0.3)):
                p = ModelParams(beta, h)
                obs = observables(ws, p, n)
                dk = standardize(enumerate_law(ws, p), obs).d_k
                bt = bound_terms(ws, p, obs, "exact-enumeration")
                margin = bt.total - dk
                ok &= dk <= bt.total + 1e-10
                worst = min(worst, margin)
                rows.append(dict(base=list(base), n=n, beta=beta, h=h, d_k=dk, t1=bt.t1,
                                 t2=bt.t2, t3=bt.t3, margin=margin))
    return CriterionResult(1, "Stein majorization", ok,
                           {"rows": rows, "summary": f"min margin {worst:.4g}"})


def berry_esseen_rate() -> CriterionResult:
    """sqrt(n) d_K stable within a factor 2 and d_K strictly decreasing, n = 16..256."""
    ns = (16, 32, 64, 128, 256)
    cases = ((HOMOGENEOUS, 0.5, 0.0), (TWO_POINT, 0.3, 0.1))
    ok, rows, ratios = True, [], []
    for base, beta, h in cases:
        p = ModelParams(beta, h)
        dks = []
        for n in ns:
            ws = _ws(base, n)
            dks.append(standardize(dp_joint(ws, p), observables(ws, p, n)).d_k)
        scaled = [d * math.sqrt(n) for d, n in zip(dks, ns)]
        ratio = max(scaled) / min(scaled)
        decreasing = all(a > b for a, b in zip(dks, dks[1:]))
        ok &= ratio <= 2.0 and decreasing
        ratios.append(ratio)
        rows.append(dict(base=list(base), beta=beta, h=h, n=list(ns), d_k=dks, sqrt_n_d_k=scaled,
                         ratio=ratio, decreasing=decreasing))
    return CriterionResult(2, "Berry-Esseen rate", ok,
                           {"rows": rows, "summary": "max/min sqrt(n) d_K " + ", ".join(f"{r:.4f}" for r in ratios)})


def regression_identity(count: int = 1000, seed: int = 20240601) -> CriterionResult:
    ws = _ws((1.0, 2.0), 50)
    p = ModelParams(0.3, 0.1)
    obs = observables(ws, p, ws.n)
    batch = sample_exact(ws, p, count, seed)
    res = np.abs(verify_regression(ws, p, obs, batch.configurations))
    worst = float(res.max())
    return CriterionResult(3, "Regression identity", worst <= 1e-12,
                           {"max_residual": worst, "summary": f"max residual {worst:.3e}"})


def error_term_bounds() -> CriterionResult:
    """Pointwise error-term bounds over every configuration at n = 12."""
    violations, rows = 0, []
    for base, beta, h in ((TWO_POINT, 0.3, 0.1), (HOMOGENEOUS, 0.5, 0.0), (TWO_POINT, 0.9, 0.3)):
        ws = _ws(base, 12)
        p = ModelParams(beta, h)
        checks = exact_errorterm_bounds(ws, p, observables(ws, p, 12))
        v = sum(c.violations for c in checks)
        violations += v
        rows.append(dict(base=list(base), beta=beta, h=h, violations=v,
                         checked=sum(c.values.size for c in checks)))
    return CriterionResult(4, "Error-term bounds", violations == 0,
                           {"rows": rows, "summary": f"{violations} violations"})


def stein_equation_properties() -> CriterionResult:
    xs = np.linspace(-10.0, 10.0, 10_000)
    worst = {"xf": 0.0, "fp": 0.0, "f_max": 0.0, "f_min": math.inf, "ode": 0.0, "monotone": 0.0}
    bound = math.sqrt(2 * math.pi) / 4
    for z in (-3.0, -1.0, 0.0, 1.0, 3.0):
        f, fp = stein_f(z, xs)
        xf = xs * f
        worst["xf"] = max(worst["xf"], float(np.max(np.abs(xf))))
        worst["fp"] = max(worst["fp"], float(np.max(np.abs(fp))))
        worst["f_max"] = max(worst["f_max"], float(f.max()))
        worst["f_min"] = min(worst["f_min"], float(f.min()))
        worst["monotone"] = max(worst["monotone"], float(np.max(-np.diff(xf))))
        # derivative of the closed form, taken branch by branch rather than from the ODE
        phi_z = 0.5 * math.erfc(-z / math.sqrt(2))
        sf_z = 0.5 * math.erfc(z / math.sqrt(2))
        root = math.sqrt(2 * math.pi)
        fp_closed = np.where(xs <= z,
                             sf_z * (1 + root * xs * scaled_lower(np.minimum(xs, z))),
                             phi_z * (root * xs * scaled_upper(np.maximum(xs, z)) - 1))
        resid = fp_closed - xs * f - (xs <= z) + phi_z
        worst["ode"] = max(worst["ode"], float(np.max(np.abs(resid))))
    ok = (worst["xf"] <= 1 and worst["fp"] <= 1 and worst["f_min"] > 0
          and worst["f_max"] <= bound + 1e-15 and worst["monotone"] <= 0 and worst["ode"] <= 1e-12)
    return CriterionResult(5, "Stein-equation properties", ok,
                           dict(worst, summary=f"max|xf|={worst['xf']:.6f} max|f'|={worst['fp']:.6f} ode={worst['ode']:.1e}"))


def oracle_equivalence() -> CriterionResult:
    worst, count = 0.0, 0
    for base in (HOMOGENEOUS, TWO_POINT, (1.0, 1.5, 3.0)):
        for n in (3, 6, 9, 12):
            if n % len(base) or n > MAX_EXACT_N:
                continue
            ws = _ws(base, n)
            bc = critical_beta(ws)
            for beta, h in ((0.0, 0.0), (0.5 * bc, 0.0), (0.5 * bc, 0.2), (2.0 * bc, -0.4)):
                p = ModelParams(beta, h)
                a, b = enumerate_law(ws, p), dp_joint(ws, p)
                la, lb = a.lookup(), b.lookup()
                if la.keys() != lb.keys():
                    return CriterionResult(6, "Oracle equivalence", False,
                                           {"summary": f"support mismatch at n={n}, base={base}"})
                worst = max(worst, max(abs(la[k] - lb[k]) for k in la))
                count += 1
    return CriterionResult(6, "Oracle equivalence", worst <= 1e-10,
                           {"instances": count, "max_log_mass_diff": worst,
                            "summary": f"{count} instances, max diff {worst:.2e}"})


def cgf_consistency() -> CriterionResult:
    worst, zero, rows = 0.0, 0.0, []
    for base, beta, h in ((HOMOGENEOUS, 0.5, 0.2), (TWO_POINT, 0.3, 0.1)):
        ws = _ws(base, 64)
        p = ModelParams(beta, h)
        jd = dp_joint(ws, p)
        k = math.sqrt(beta / moments(ws, 1))
        zero = max(zero, abs(cgf(ws, p, 0.0, with_second=False).value))
        for s in (-0.5, -0.1, 0.1, 0.5):
            c = cgf(ws, p, s, with_second=False).value
            exact = jd.log_mgf_t(s * k) / ws.n
            rel = abs(c - exact) / abs(exact)
            worst = max(worst, rel)
            rows.append(dict(base=list(base), s=s, quadrature=c, exact=exact, rel=rel))
    return CriterionResult(7, "CGF consistency", worst <= 1e-8 and zero <= 1e-12,
                           {"rows": rows, "summary": f"max rel err {worst:.2e}, |c(0)|={zero:.1e}"})


def weighted_clt() -> CriterionResult:
    ns = (64, 128, 256)
    ok, rows = True, []
    for base, beta, h in ((TWO_POINT, 0.3, 0.1), (HOMOGENEOUS, 0.5, 0.0)):
        p = ModelParams(beta, h)
        var_gap, mu4_gap = [], []
        for n in ns:
            ws = _ws(base, n)
            ms = standardize(dp_joint(ws, p), observables(ws, p, n))
            var_gap.append(abs(ms.variance_tilde - 1.0))
            mu4_gap.append(abs(ms.mu4_tilde - 3.0))
        good = (all(a > b for a, b in zip(var_gap, var_gap[1:])) and var_gap[-1] <= 0.05
                and all(a > b for a, b in zip(mu4_gap, mu4_gap[1:])))
        ok &= good
        rows.append(dict(base=list(base), beta=beta, h=h, n=list(ns), var_gap=var_gap, mu4_gap=mu4_gap))
    return CriterionResult(8, "Weighted-sum CLT", ok,
                           {"rows": rows, "summary": "|Var-1| at n=256: " + ", ".join(f"{r['var_gap'][-1]:.4f}" for r in rows)})


def _chi_square(counts: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    small = expected < min_expected
    obs = np.append(counts[~small], counts[small].sum())
    exp = np.append(expected[~small], expected[small].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return stat, obs.size - 1


def sampler_exactness(count: int = 1_000_000, seed: int = 7) -> CriterionResult:
    ws = _ws(TWO_POINT, 12)
    p = ModelParams(0.3, 0.1)
    law = enumerate_law(ws, p)
    keys = list(zip(law.s.tolist(), law.t_index.tolist()))
    index = {k: i for i, k in enumerate(keys)}
    pmf = law.mass

    def histogram(cfgs):
        s = cfgs.sum(axis=1, dtype=np.int64)
        t = np.rint(cfgs.astype(float) @ ws.values * ws.integer_scale).astype(np.int64)
        idx = np.array([index[k] for k in zip(s.tolist(), t.tolist())])
        return np.bincount(idx, minlength=len(keys))

    batch = sample_exact(ws, p, count, seed)
    h_exact = histogram(batch.configurations)
    tv = 0.5 * float(np.sum(np.abs(h_exact / count - pmf)))
    # independent chains started from exact draws, each advanced 10n heat-bath steps
    start = sample_exact(ws, p, count, seed + 1).configurations
    final = glauber_run(ws, p, start, 10 * ws.n, make_rng(seed, 2))
    stat, df = _chi_square(histogram(final), count * pmf)
    threshold = df + 4.0 * math.sqrt(2.0 * df)
    ok = tv <= 0.01 and stat <= threshold
    return CriterionResult(9, "Sampler exactness", ok,
                           {"tv": tv, "chi2": stat, "df": df, "chi2_threshold": threshold,
                            "summary": f"TV={tv:.4f}, chi2={stat:.1f} (df={df}, limit {threshold:.1f})"})


def susceptibility_consistency(step: float = 1e-5) -> CriterionResult:
    ws = WeightSequence(TWO_POINT)
    bc = critical_beta(ws)
    worst = 0.0
    for beta in (0.2 * bc, 0.5 * bc, 0.8 * bc):
        for h in (0.0, 0.1, 0.4):
            obs = observables(ws, ModelParams(beta, h), ws.n)
            up = observables(ws, ModelParams(beta, h + step), ws.n).m_n_inf
            down = observables(ws, ModelParams(beta, h - step), ws.n).m_n_inf
            worst = max(worst, abs((up - down) / (2 * step) - obs.chi))
    homog = WeightSequence(HOMOGENEOUS)
    closed = max(abs(observables(homog, ModelParams(b, 0.0), 1).chi - 1.0 / (1.0 - b))
                 for b in (0.1, 0.5, 0.9))
    return CriterionResult(10, "Susceptibility consistency", worst <= 1e-6 and closed <= 1e-10,
                           {"max_fd_error": worst, "homogeneous_error": closed,
                            "summary": f"fd err {worst:.2e}, closed-form err {closed:.1e}"})


CRITERIA = {
    1: stein_majorization,
    2: berry_esseen_rate,
    3: regression_identity,
    4: error_term_bounds,
    5: stein_equation_properties,
    6: oracle_equivalence,
    7: cgf_consistency,
    8: weighted_clt,
    9: sampler_exactness,
    10: susceptibility_consistency,
}


def run_criterion(number: int) -> CriterionResult:
    t0 = time.perf_counter()
    result = CRITERIA[number]()
    result.seconds = time.perf_counter() - t0
    return result


def run_all(selected=None, echo=print) -> list:
    results = []
    for number in selected or sorted(CRITERIA):
        result = run_criterion(number)
        if echo is not None:
            echo(result.line())
        results.append(result)
    return results
