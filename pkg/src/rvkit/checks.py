"""Acceptance and invariant checks shared by ``rvkit check`` and the test suite.

Each check returns a :class:`CheckResult` with the measured quantity, the
tolerance it is held to and whether it is asserted.  Reports carry no
timings, so they are reproducible byte for byte; runtimes are logged.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .boundary import RoundSphere, circle, ellipse
from .expansion import apply_indicial, expand_minimal_graph, solve_indicial
from .phg import EVEN, ODD, PhgSeries, parity, parity_consistent
from .renvol import (HemisphereTail, check_equivalence, hadamard_rv, riesz_rv,
                     riesz_rv_special, special_bdf_difference, special_bdf_localized)
from .solver import (ProfileTail, end_expansions, extract_coefficients,
                     solve_rotational)
from .variation import (first_variation, killing_check, killing_field,
                        second_variation)

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
M4_LADDER = np.geomspace(0.2, 0.005, 30)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    asserted: bool = True
    detail: dict = field(default_factory=dict)
    note: str = ""
    budget: float | None = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        kind = "" if self.asserted else " (reported)"
        return f"{status} {self.name}: measured {self.measured:.3e} tol {self.tolerance:.1e}{kind}"

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "measured": float(self.measured), "tolerance": self.tolerance,
                "asserted": self.asserted, "detail": _plain(self.detail),
                "note": self.note}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _hemisphere(R, m, neumann=None):
    bdy = RoundSphere(R, m, m - 1)
    return expand_minimal_graph(bdy, m, m, neumann=neumann)


# ------------------------------------------------------------ criteria
def hemisphere_area(radii=(0.5, 1.0, 2.0), tol=1e-6) -> CheckResult:
    vals = {}
    worst = 0.0
    for R in radii:
        g = _hemisphere(R, 2)
        tail = HemisphereTail(R, 2)
        r = riesz_rv(g, tail, 0.1 * R).value
        h = hadamard_rv(lambda e: tail.tail(e)[0], 2, R * np.geomspace(1e-1, 1e-4, 24)).value
        vals[R] = {"riesz": r, "hadamard": h}
        worst = max(worst, abs(r + TWO_PI), abs(h + TWO_PI), abs(r - h))
    return CheckResult("1 hemisphere renormalized area -2pi", worst < tol, worst, tol,
                       detail=vals, budget=1.0)


def expansion_u2(tol_series=1e-8, tol_fit=5e-4) -> CheckResult:
    worst_s, worst_f = 0.0, 0.0
    detail = {}
    for R in (0.5, 1.0, 2.0):
        g = expand_minimal_graph(circle(R, P=32), 2, 2)
        worst_s = max(worst_s, float(np.max(np.abs(g.u[0].coeff(2) + 1 / (2 * R)))))
        for m in (2, 3, 4):
            g = expand_minimal_graph(RoundSphere(R, m, m - 1), m, m)
            worst_s = max(worst_s, abs(g.u[0].coeff(2) + 1 / (2 * R)))
    for R in (0.5, 1.0, 2.0):
        fit = extract_coefficients(solve_rotational("hemisphere", {"R": R}))[0]
        detail[f"hemisphere R={R}"] = fit["u"][2]
        worst_f = max(worst_f, abs(fit["u"][2] + 1 / (2 * R)))
    cat = solve_rotational("catenoid", {"rho": 1.0, "separation": 0.5})
    for end, fit in zip(cat.ends, extract_coefficients(cat)):
        worst_f = max(worst_f, abs(fit["u"][2] + 1 / (2 * end.radius)))
    detail.update(series_error=worst_s, fit_error=worst_f)
    ok = worst_s < tol_series and worst_f < tol_fit
    return CheckResult("2 expansion u2 = -1/(2R)", ok, max(worst_s, worst_f / tol_fit * tol_series),
                       tol_series, detail=detail, budget=5.0,
                       note="measured is the series error; the fit error is scaled to the same tolerance")


def parity_suite(seed=0, cases=4) -> CheckResult:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(cases):
        a, b = 1.0 + rng.uniform(0.1, 1.0), 1.0
        for n in (2, 3):
            bdy = ellipse(a, b, P=32, n=n)
            g = expand_minimal_graph(bdy, 2, n, neumann=rng.normal(scale=0.3), order=6)
            for k, u in enumerate(g.u):
                if not parity_consistent(u, EVEN):
                    failures.append(f"u[{k}] ellipse a={a:.3f} n={n}")
            if not parity_consistent(g.h_ax, ODD):
                failures.append(f"h_ax ellipse a={a:.3f} n={n}")
            if parity(g.q) != EVEN:
                failures.append(f"q ellipse a={a:.3f} n={n}")
            for s in list(g.u) + [g.q, g.h_xx, g.h_ab]:
                if np.any(s.array[:4, 1] != 0):
                    failures.append(f"log at or below order 3, n={n}")
    cap = expand_minimal_graph(RoundSphere(1.0, 3, 2), 3, 3, neumann=-0.125)
    u = cap.u[0]
    first_log = next((k for k in range(u.order + 1) if u.has_term(k, True)), None)
    if first_log != 4:
        failures.append(f"m=3 cap first log slot at order {first_log}")
    return CheckResult("3 parity and log structure", not failures, float(len(failures)), 0.0,
                       detail={"failures": failures, "m3_first_log_order": first_log,
                               "m3_log_value": float(u.coeff(4, True))}, budget=10.0)


def equivalence(tol=1e-6, defect_tol=1e-4) -> CheckResult:
    detail = {}
    worst = 0.0
    for m in (2, 4):
        g = _hemisphere(1.0, m)
        tail = HemisphereTail(1.0, m)
        r = riesz_rv(g, tail, 0.1).value
        eps = None if m == 2 else M4_LADDER
        h = hadamard_rv(lambda e: tail.tail(e)[0], m, eps, extra=3 if m == 2 else 8).value
        detail[f"m={m}"] = {"riesz": r, "hadamard": h}
        worst = max(worst, abs(r - h))
    g3 = _hemisphere(1.0, 3, neumann=-0.125)
    rep = check_equivalence(g3, HemisphereTail(1.0, 3))
    detail["m=3"] = {"defect": rep["defect"], "spread": rep["defect_spread"],
                     "riesz": rep["riesz"]}
    ok = worst < tol and rep["defect_spread"] < defect_tol
    return CheckResult("4 Hadamard = Riesz (m even), stable defect (m odd)", ok, worst, tol,
                       detail=detail, budget=10.0)


def _catenoid_V(R1, R2, delta=0.01):
    sol = solve_rotational("catenoid", {"R1": R1, "R2": R2})
    gs = end_expansions(sol)
    return riesz_rv(gs, ProfileTail(sol), delta).value, gs, sol


def _d_family(d, rho=1.0):
    return rho * math.exp(-d / 2), rho * math.exp(d / 2)


def first_variation_oracle(d=0.5, h=2e-3, tol=2e-3, tol_closed=1e-8) -> CheckResult:
    V = {}
    for t in (-h, -h / 2, h / 2, h):
        V[t] = _catenoid_V(*_d_family(d + t))[0]
    D1 = (V[h] - V[-h]) / (2 * h)
    D2 = (V[h / 2] - V[-h / 2]) / h
    fd = (4 * D2 - D1) / 3
    _, gs, _ = _catenoid_V(*_d_family(d))
    R1, R2 = _d_family(d)
    fv = first_variation(gs, [-R1 / 2, R2 / 2])
    rel = abs(fv["general"] - fd) / abs(fd)
    ok = rel < tol and fv["difference"] < tol_closed
    return CheckResult("5 first variation vs finite differences", ok, rel, tol,
                       detail={"finite_difference": fd, "general": fv["general"],
                               "closed_form": fv["closed_form"],
                               "closed_vs_general": fv["difference"]}, budget=60.0)


def translation_isometry(tol=1e-5) -> CheckResult:
    g = expand_minimal_graph(circle(1.0, P=32), 2, 2)
    worst = 0.0
    detail = {}
    for theta in (0.0, 0.7):
        phi, acc = killing_field(g, "translation", theta)
        sv = second_variation(g, phi, acc)
        detail[f"theta={theta}"] = {"closed_form": sv["closed_form"], "theorem": sv["theorem"]}
        worst = max(worst, abs(sv["closed_form"]), abs(sv["theorem"]))
    return CheckResult("6 hemisphere translation second variation = 0", worst < tol, worst, tol,
                       detail=detail, budget=30.0)


def l2_identity(d=0.5, tol=2e-3) -> CheckResult:
    _, gs, _ = _catenoid_V(*_d_family(d))
    kc = killing_check(gs, tol)
    ratio = abs(kc["u2_un_integral"]) / kc["u2_un_scale"]
    kc4 = killing_check(_hemisphere(1.0, 4))
    detail = {"catenoid_sum_u2_u3": kc["u2_un_integral"], "scale": kc["u2_un_scale"],
              "family_form_translation_sum": kc["translation-sum"]["second"]["family_form"],
              "closed_form_translation_sum": kc["translation-sum"]["second"]["closed_form"],
              "n4_hemisphere_u2_u5_mean": kc4["u2_un_mean"], "n4_formula": kc4["l2_formula"],
              "n4_residual": kc4["l2_residual"]}
    return CheckResult("7 L2 identity sum <u2,u3> = 0 on catenoids", ratio < tol, ratio, tol,
                       detail=detail, budget=30.0,
                       note="known deviation: the identity rests on a second-variation "
                            "formula that finite differences of V do not support")


def indicial_selftest(seed=0, trials=20) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 6))
        N = m + 4
        terms = {(k, False): rng.normal() for k in range(N + 1)}
        for k in range(N + 1):
            if k != m and rng.random() < 0.3:
                terms[(k, True)] = rng.normal()
        src = PhgSeries.from_terms(terms, N, m=m)
        back = apply_indicial(solve_indicial(src, m), m)
        worst = max(worst, float(np.max(np.abs(back.array - src.array))))
    return CheckResult("8 indicial operator self-test", worst < 1e-12, worst, 1e-12,
                       budget=1.0)


def special_bdf_invariance(tol=1e-6) -> CheckResult:
    g = _hemisphere(1.0, 2)
    tail = HemisphereTail(1.0, 2)
    direct = max(abs(riesz_rv_special(g, tail, d).value - riesz_rv(g, tail, d).value)
                 for d in (0.05, 0.1, 0.2))
    loc = abs(special_bdf_localized(g)["value"])
    detail = {"hemisphere_direct": direct, "hemisphere_localized": loc}
    worst = max(direct, loc)
    for a, c in ((1.5, 0.2), (2.0, -0.3)):
        bdy = ellipse(a, 1.0, P=32)
        s = 2 * np.pi * bdy.s / bdy.length
        ge = expand_minimal_graph(bdy, 2, 2, neumann=c + 0.1 * np.cos(2 * s))
        lo = abs(special_bdf_localized(ge)["value"])
        hd = abs(special_bdf_difference(ge).value)
        detail[f"ellipse a={a}"] = {"localized": lo, "hadamard_difference": hd}
        worst = max(worst, lo, hd)
    return CheckResult("9 special bdf invariance (m even)", worst < tol, worst, tol,
                       detail=detail, budget=30.0,
                       note="ellipse Neumann data are synthetic; the solver is rotational only")


CRITERIA = [hemisphere_area, expansion_u2, parity_suite, equivalence,
            first_variation_oracle, translation_isometry, l2_identity,
            indicial_selftest, special_bdf_invariance]

SUITES = {
    "parity": [parity_suite, indicial_selftest, hemisphere_area],
    "acceptance": CRITERIA,
}


def run_suite(name="acceptance"):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    out = []
    for fn in SUITES[name]:
        t0 = time.perf_counter()
        res = fn()
        dt = time.perf_counter() - t0
        log.info("%s (%.2fs)", res.line(), dt)
        if res.budget is not None and dt > res.budget:
            log.warning("%s exceeded its runtime budget (%.1fs > %.1fs)", res.name, dt, res.budget)
        out.append(res)
    return out
