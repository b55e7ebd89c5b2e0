"""Rotationally symmetric minimal hypersurfaces of the half-space model.

A hypersurface of H^{m+1} invariant under rotations about the x-axis is
generated by a profile curve in the quarter plane {(r, x): r >= 0, x > 0}.
Its area is ``|S^{m-1}| * int r^{m-1} x^{-m} dsigma``, and the profile is
a geodesic for the weight ``f = r^{m-1} x^{-m}``:

    theta' = -(m - 1) sin(theta) / r - m cos(theta) / x        (arclength)

with unit tangent (cos theta, sin theta).  Near the boundary the profile
is a graph r(x); in ``t = log x`` with ``q = r' / x`` the equation reads

    dr/dt = x^2 q,
    dq/dt = (m - 1) q + (m - 1)(1 + x^2 q^2) / r + m x^2 q^3,

which is regular as t -> -inf and keeps every quantity O(1).  The Neumann
mode ``q ~ x^{m-1}`` decays in that direction, so integrating toward the
boundary is stable.

Two families are provided.  Hemispheres are shot from the apex.  Catenoids
span two concentric boundary spheres of radii ``rho e^{-d/2}`` and
``rho e^{d/2}``; inversion in the sphere of radius rho swaps the ends, so
the profile crosses that sphere orthogonally and is shot from there.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .boundary import RoundSphere, sphere_area
from .expansion import expand_minimal_graph


class SolverError(RuntimeError):
    """The profile could not be computed or failed validation."""


class NonexistenceError(SolverError):
    """No minimal surface exists for the requested parameters."""


RTOL = 1e-13
ATOL = 1e-15
SWITCH_SIN = -math.sin(math.pi / 3)
DEFAULT_FLOOR = 1e-6
DEFAULT_WINDOW = (1e-4, 1e-2)
POINTS_PER_DECADE = 40
MAX_STEP = 0.02


# ------------------------------------------------------------------ ODEs
def _arclength_rhs(m):
    def rhs(s, y):
        r, x, th = y
        return [math.cos(th), math.sin(th),
                -(m - 1) * math.sin(th) / r - m * math.cos(th) / x]
    return rhs


def _graph_rhs(m):
    def rhs(t, y):
        r, q = y
        x2 = math.exp(2 * t)
        return [x2 * q, (m - 1) * q + (m - 1) * (1 + x2 * q * q) / r + m * x2 * q ** 3]
    return rhs


def _rk4(rhs, t0, t1, y0, steps):
    ts = np.linspace(t0, t1, steps + 1)
    h = ts[1] - ts[0]
    ys = np.empty((steps + 1, len(y0)))
    ys[0] = y0
    y = np.array(y0, dtype=float)
    for i in range(steps):
        t = ts[i]
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + h / 2, y + h / 2 * k1))
        k3 = np.asarray(rhs(t + h / 2, y + h / 2 * k2))
        k4 = np.asarray(rhs(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return ts, ys


class _Interp:
    """Dense-output stand-in for fixed-step runs (cubic Hermite on the steps)."""

    def __init__(self, ts, ys, rhs):
        from scipy.interpolate import CubicHermiteSpline
        order = np.argsort(ts)
        ts, ys = ts[order], ys[order]
        dy = np.array([rhs(t, y) for t, y in zip(ts, ys)])
        self._spl = CubicHermiteSpline(ts, ys, dy, axis=0)

    def __call__(self, t):
        return self._spl(t).T


# --------------------------------------------------------------- pieces
@dataclass
class ProfileEnd:
    """One boundary end of a profile: an arclength arc then a graph piece."""

    radius: float
    x_switch: float
    t_floor: float
    arc: object            # dense output in s: (r, x, theta)
    arc_span: tuple
    graph: object          # dense output in t = log x: (r, p)
    x: np.ndarray          # graded mesh, increasing
    r: np.ndarray
    p: np.ndarray
    residual: float = 0.0

    @property
    def u(self):
        return self.r - self.radius


@dataclass
class ProfileSolution:
    family: str
    m: int
    params: dict
    ends: list
    residual: float
    validation: dict = field(default_factory=dict)
    coefficients: list = field(default_factory=list)

    @property
    def n(self):
        return self.m

    @property
    def boundary_radii(self):
        return tuple(e.radius for e in self.ends)

    def to_dict(self, samples=True):
        out = {"family": self.family, "m": self.m, "n": self.n,
               "params": {k: float(v) for k, v in sorted(self.params.items())},
               "boundary_radii": [float(r) for r in self.boundary_radii],
               "residual": float(self.residual),
               "validation": self.validation,
               "coefficients": self.coefficients}
        if samples:
            out["profiles"] = [{"radius": float(e.radius), "x": e.x.tolist(),
                                "r": e.r.tolist()} for e in self.ends]
        return out

    def csv_rows(self):
        """(end index, x, r, u) rows for plotting."""
        rows = []
        for i, e in enumerate(self.ends):
            for x, r in zip(e.x, e.r):
                rows.append((i, float(x), float(r), float(r - e.radius)))
        return rows


def _shoot_arc(m, y0, s_max, direction=1.0):
    """Integrate the arclength ODE until the tangent points steeply down."""
    rhs = _arclength_rhs(m)

    def steep(s, y):
        return math.sin(y[2]) - SWITCH_SIN
    steep.terminal = True
    steep.direction = -1

    def hit_floor(s, y):
        return y[1]
    hit_floor.terminal = True

    def hit_axis(s, y):
        return y[0]
    hit_axis.terminal = True

    sol = solve_ivp(rhs, (0.0, s_max), y0, method="DOP853", rtol=RTOL, atol=ATOL,
                    dense_output=True, events=(steep, hit_floor, hit_axis))
    if sol.status != 1 or sol.t_events[0].size == 0:
        raise SolverError("profile never turned toward the boundary")
    return sol


def _graph_piece(m, r0, x0, theta0, floor, steps=None, fine=True):
    q0 = math.cos(theta0) / math.sin(theta0) / x0
    t0, t1 = math.log(x0), math.log(floor)
    rhs = _graph_rhs(m)
    if steps is None:
        sol = solve_ivp(rhs, (t0, t1), [r0, q0], method="DOP853", rtol=RTOL,
                        atol=ATOL, dense_output=fine,
                        max_step=MAX_STEP if fine else math.inf)
        if sol.status != 0:
            raise SolverError(f"graph integration failed: {sol.message}")
        return sol.sol
    nsteps = max(1, int(math.ceil(steps * (t0 - t1))))
    ts, ys = _rk4(rhs, t0, t1, [r0, q0], nsteps)
    return _Interp(ts, ys, rhs)


def _graph_residual(m, dense, t_lo, t_hi):
    """Relative defect of dq/dt on a uniform t-mesh (8th-order differences)."""
    h = math.log(10) / 400
    ts = np.arange(t_lo + 4 * h, t_hi - 4 * h, h)
    if ts.size < 3:
        return 0.0
    w = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    offs = np.arange(-4, 5) * h
    Q = np.stack([dense(ts + o)[1] for o in offs], axis=1)
    dq = Q @ w / h
    r, q = dense(ts)
    x2 = np.exp(2 * ts)
    f = (m - 1) * q + (m - 1) * (1 + x2 * q * q) / r + m * x2 * q ** 3
    return float(np.max(np.abs(dq - f) / np.maximum(np.abs(f), 1.0)))


def _finish_end(m, arc, floor, steps=None):
    s_sw = float(arc.t_events[0][0])
    r0, x0, th0 = arc.y_events[0][0]
    dense = _graph_piece(m, r0, x0, th0, floor, steps)
    t_hi, t_lo = math.log(x0), math.log(floor)
    decades = (t_hi - t_lo) / math.log(10)
    ts = np.linspace(t_lo, t_hi, int(math.ceil(decades * POINTS_PER_DECADE)) + 1)
    r, q = dense(ts)
    p = np.exp(2 * ts) * q
    r_floor = float(r[0])
    # the x^2 coefficient at the floor is -1/(2R); its correction is O(x^4)
    radius = r_floor + floor ** 2 / (2 * r_floor)
    end = ProfileEnd(radius=radius, x_switch=x0, t_floor=t_lo, arc=arc.sol,
                     arc_span=(0.0, s_sw), graph=dense, x=np.exp(ts), r=r, p=p)
    end.residual = _graph_residual(m, dense, t_lo, t_hi) if steps is None else float("nan")
    return end


# -------------------------------------------------------------- families
def _hemisphere(R, m, floor, steps):
    s0 = 1e-5 * R
    y0 = [s0, R - s0 * s0 / (2 * R), -s0 / R]
    arc = _shoot_arc(m, y0, 4 * R)
    return [_finish_end(m, arc, floor, steps)]


def _catenoid_end(rho, alpha, m, floor, steps, inner=False):
    th = alpha + math.pi if inner else alpha
    y0 = [rho * math.cos(alpha), rho * math.sin(alpha), th]
    arc = _shoot_arc(m, y0, 50 * rho)
    return _finish_end(m, arc, floor, steps)


def _catenoid_separation(rho, alpha, m, floor=1e-3):
    y0 = [rho * math.cos(alpha), rho * math.sin(alpha), alpha]
    arc = _shoot_arc(m, y0, 50 * rho)
    r0, x0, th0 = arc.y_events[0][0]
    q0 = math.cos(th0) / math.sin(th0) / x0
    sol = solve_ivp(_graph_rhs(m), (math.log(x0), math.log(floor)), [r0, q0],
                    method="DOP853", rtol=RTOL, atol=ATOL)
    r = float(sol.y[0, -1])
    return 2 * math.log((r + floor ** 2 / (2 * r)) / rho)


@lru_cache(maxsize=None)
def catenoid_threshold(m=2):
    """Largest separation ``d = log(R2/R1)`` admitting a catenoid, and its angle.

    Dilations are isometries, so neither depends on rho.
    """
    res = minimize_scalar(lambda a: -_catenoid_separation(1.0, a, m),
                          bounds=(0.05, 1.5), method="bounded",
                          options={"xatol": 1e-10})
    return -float(res.fun), float(res.x)


def _catenoid(rho, d, m, floor, steps):
    d_max, a_max = catenoid_threshold(m)
    if d >= d_max:
        raise NonexistenceError(
            f"no catenoid for separation {d:.6g}; maximum is {d_max:.6g}")
    def f(a):
        return _catenoid_separation(rho, a, m) - d

    lo = a_max / 2
    while f(lo) > 0:
        lo /= 2
        if lo < 1e-4:
            raise SolverError("separation too small to bracket the thin branch")
    alpha = brentq(f, lo, a_max, xtol=1e-14, rtol=1e-14)
    outer = _catenoid_end(rho, alpha, m, floor, steps)
    inner = _catenoid_end(rho, alpha, m, floor, steps, inner=True)
    return [inner, outer], alpha, d_max


def _catenoid_params(params):
    if "R1" in params and "R2" in params:
        R1, R2 = float(params["R1"]), float(params["R2"])
        if not 0 < R1 < R2:
            raise ValueError("catenoid radii must satisfy 0 < R1 < R2")
        return math.sqrt(R1 * R2), math.log(R2 / R1)
    rho = float(params.get("rho", 1.0))
    d = float(params["separation"])
    if d <= 0 or rho <= 0:
        raise ValueError("catenoid separation and rho must be positive")
    return rho, d


def _inversion_defect(ends, rho, samples=200):
    """Max distance between inverted inner-arc points and the outer arc."""
    inner, outer = ends
    s_in = np.linspace(*inner.arc_span, samples)
    r, x, _ = inner.arc(s_in)
    k = rho ** 2 / (r ** 2 + x ** 2)
    targets = np.stack([k * r, k * x], axis=1)
    s_out = np.linspace(*outer.arc_span, 20 * samples)
    pts = np.stack(outer.arc(s_out)[:2], axis=1)
    h = s_out[1] - s_out[0]
    worst = 0.0
    for P in targets:
        i = int(np.argmin(np.sum((pts - P) ** 2, axis=1)))
        lo, hi = max(s_out[i] - h, outer.arc_span[0]), min(s_out[i] + h, outer.arc_span[1])
        res = minimize_scalar(lambda s: float(np.sum((outer.arc(s)[:2] - P) ** 2)),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        worst = max(worst, math.sqrt(res.fun))
    return worst


def solve_rotational(family, params=None, m=2, *, floor=DEFAULT_FLOOR, steps=None,
                     validate=True) -> ProfileSolution:
    """Solve for a rotational minimal hypersurface of H^{m+1}.

    ``family`` is ``"hemisphere"`` (``R``), ``"cap"`` (``R``, ``n``; the
    hypersurface is a hemisphere of H^{n+1}) or ``"catenoid"`` (``rho`` and
    ``separation``, or ``R1`` and ``R2``).  ``steps`` switches the graph
    piece to fixed-step RK4 with that many steps per unit of log x.
    """
    params = dict(params or {})
    if not 0 < floor < 1e-2:
        raise ValueError("mesh floor must lie in (0, 1e-2)")
    if family == "cap":
        m = int(params.get("n", m))
        family = "hemisphere"
    if m < 2:
        raise ValueError("need m >= 2")
    if family == "hemisphere":
        R = float(params.get("R", 1.0))
        if R <= 0:
            raise ValueError("radius must be positive")
        ends = _hemisphere(R, m, floor, steps)
        params = {"R": R}
        extra = {}
    elif family == "catenoid":
        rho, d = _catenoid_params(params)
        ends, alpha, d_max = _catenoid(rho, d, m, floor, steps)
        params = {"rho": rho, "separation": d}
        extra = {"crossing_angle": alpha, "max_separation": d_max}
    else:
        raise ValueError(f"unknown family {family!r}")
    res = max(e.residual for e in ends)
    sol = ProfileSolution(family=family, m=m, params=params, ends=ends,
                          residual=res if steps is None else float("nan"))
    sol.validation.update({k: float(v) for k, v in extra.items()})
    if family == "catenoid":
        sol.validation["inversion_defect"] = _inversion_defect(ends, params["rho"])
    if validate:
        _validate(sol)
    return sol


def _validate(sol: ProfileSolution):
    if sol.residual > 1e-10 and not math.isnan(sol.residual):
        raise SolverError(f"ODE residual {sol.residual:.2e} exceeds 1e-10")
    fits = extract_coefficients(sol)
    bound = 0.0
    for e, fit in zip(sol.ends, fits):
        target = -1.0 / (2 * e.radius)
        if abs(fit["u"][2] - target) > 5e-4:
            raise SolverError(f"extracted u2 {fit['u'][2]:.6g} disagrees with {target:.6g}")
        bound = max(bound, float(np.max(np.abs(e.u) / e.x ** 2)))
    sol.validation["quadratic_bound"] = bound
    sol.coefficients = fits


# --------------------------------------------------------- coefficients
def _basis(x, m, extra):
    """Columns for q = r'/x from u = sum u_k x^k (+ U x^k log x)."""
    cols, labels = [], []
    for k in range(2, m + 2 + extra):
        if k <= m and k % 2 == 1:
            continue
        cols.append(k * x ** (k - 2))
        labels.append((k, False))
        if m % 2 == 1 and k >= m + 1:
            cols.append(x ** (k - 2) * (k * np.log(x) + 1))
            labels.append((k, True))
    return np.stack(cols, axis=1), labels


def extract_coefficients(sol: ProfileSolution, m=None, window=DEFAULT_WINDOW, extra=3,
                         cond_guard=1e10):
    """Fit u(x) = r(x) - R on each end; returns one report per end.

    The fit uses ``q = r'/x`` so the boundary radius does not enter.  The
    basis follows the expansion shape: even powers below ``m``, every power
    from ``m + 1`` on, and log companions from ``m + 1`` when m is odd.
    """
    m = sol.m if m is None else int(m)
    lo, hi = window
    out = []
    for e in sol.ends:
        if lo < math.exp(e.t_floor) or hi > e.x_switch:
            raise SolverError("fitting window outside the graded mesh")
        x = np.geomspace(lo, hi, 121)
        r, y = e.graph(np.log(x))
        A, labels = _basis(x, m, extra)
        norms = np.max(np.abs(A), axis=0)
        As = A / norms
        cond = float(np.linalg.cond(As))
        if cond > cond_guard:
            raise SolverError(f"fit condition number {cond:.2e} exceeds guard")
        coef, *_ = np.linalg.lstsq(As, y, rcond=None)
        fitres = y - As @ coef
        dof = max(len(y) - len(coef), 1)
        sigma2 = float(fitres @ fitres) / dof
        cov = sigma2 * np.linalg.inv(As.T @ As) / np.outer(norms, norms)
        coef = coef / norms
        u = {k: 0.0 for k in range(2, m + 2)}
        logc = 0.0
        for (k, lg), c in zip(labels, coef):
            if lg:
                if k == m + 1:
                    logc = float(c)
            elif k <= m + 1:
                u[k] = float(c)
        R = float(np.mean(r - sum(c * x ** k for (k, lg), c in zip(labels, coef) if not lg)
                          - sum(c * x ** k * np.log(x) for (k, lg), c in zip(labels, coef) if lg)))
        idx = {lab: i for i, lab in enumerate(labels)}
        std = {k: float(math.sqrt(max(cov[idx[(k, False)], idx[(k, False)]], 0.0)))
               for k in u if (k, False) in idx}
        out.append({"radius": R, "u": u, "log": logc if m % 2 == 1 else None,
                    "std": std, "condition": cond,
                    "fit_residual": float(np.max(np.abs(fitres))),
                    "window": [lo, hi]})
    return out


# ----------------------------------------------------------------- tail
def _density(m, r, x, z):
    return sphere_area(m - 1) * r ** (m - 1) * x ** (z - m)


def tail_volume(sol: ProfileSolution, delta, z=0.0, *, with_error=False):
    """``int_{x >= delta} x^z dA`` over the solved hypersurface."""
    m = sol.m
    total, err = 0.0, 0.0
    for e in sol.ends:
        if not math.exp(e.t_floor) <= delta < e.x_switch:
            raise SolverError(f"delta {delta} outside the mesh range of an end")

        def f_graph(t):
            r, q = e.graph(t)
            x = math.exp(t)
            return _density(m, r, x, z) * x * math.sqrt(1 + (x * q) ** 2)

        def f_arc(s):
            r, x, _ = e.arc(s)
            return _density(m, r, x, z)

        v1, e1 = quad(f_graph, math.log(delta), math.log(e.x_switch),
                      epsabs=1e-12, epsrel=1e-13, limit=200)
        v2, e2 = quad(f_arc, *e.arc_span, epsabs=1e-12, epsrel=1e-13, limit=200)
        total += v1 + v2
        err += e1 + e2
    if sol.family == "hemisphere":
        # the arc starts a distance s0 from the apex; add the tiny cap it skips
        R = sol.params["R"]
        s0 = 1e-5 * R
        total += sphere_area(m - 1) * s0 ** m / m * R ** (z - m)
    return (total, err) if with_error else total


class ProfileTail:
    """Tail provider over a solved profile (see :mod:`rvkit.renvol`)."""

    def __init__(self, sol: ProfileSolution):
        self.sol = sol
        self.m = sol.m

    def tail(self, delta, z=0.0):
        return tail_volume(self.sol, delta, z, with_error=True)

    def density(self, x):
        """``int_gamma qbar`` at height x, summed over ends: x^m dA/dx."""
        m = self.m
        out = 0.0
        for e in self.sol.ends:
            r, q = e.graph(math.log(x))
            out += sphere_area(m - 1) * r ** (m - 1) * math.sqrt(1 + (x * q) ** 2)
        return out


def end_expansions(sol: ProfileSolution, fits=None, order=None):
    """Boundary expansions of each end, seeded with the fitted Neumann data."""
    fits = extract_coefficients(sol) if fits is None else fits
    m = sol.m
    out = []
    for end, fit in zip(sol.ends, fits):
        bdy = RoundSphere(end.radius, m, m - 1)
        out.append(expand_minimal_graph(bdy, m, m, neumann=fit["u"][m + 1],
                                        order=order))
    return out
