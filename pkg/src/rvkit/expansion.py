"""Formal expansion of minimal graphs near the boundary of half-space.

Near the boundary a minimal submanifold Y^m of H^{n+1} = {(y, x): x > 0}
is written as a graph over the cylinder gamma x [0, eps):

    G(s, x) = (gamma(s) + u^i(s, x) N_i(s), x).

The compactified metric is Euclidean, so the hyperbolic mean curvature
vector follows from the conformal change ``g = x^-2 (dy^2 + dx^2)``:

    H = x * ( x * hbar^{ab} (d_a d_b G) + m e_x )^perp.

Its normal-frame components are computed here entirely in series
arithmetic.  Linearizing at u = 0 gives ``H = x^2 H_gamma + x I(u/x) + ...``
with the indicial operator ``I = (x d_x + 1)(x d_x - m)``, which drives the
order-by-order solve in :func:`expand_minimal_graph`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import CurveBoundary, RoundSphere
from .phg import PhgSeries, SeriesError, inverse_x_dx, x_dx


class ExpansionError(RuntimeError):
    """The order-by-order solve lost internal consistency."""


RESIDUAL_TOL = 1e-8


def indicial_polynomial(K, m):
    return (K + 1) * (K - m)


def apply_indicial(w: PhgSeries, m) -> PhgSeries:
    """Apply ``(x d_x + 1)(x d_x - m)`` at the u/x level."""
    v = x_dx(w) - m * w
    return x_dx(v) + v


def solve_indicial(source: PhgSeries, m) -> PhgSeries:
    """Particular solution of ``(x d_x + 1)(x d_x - m) w = source``.

    A term ``a x^K`` maps to ``a x^K / P(K)`` with ``P(K) = (K+1)(K-m)``;
    ``b x^K log x`` maps to ``(b/P) x^K log x - b P'(K)/P^2 x^K``.  At the
    resonance ``K = m`` the term ``a x^m`` maps to ``a/(m+1) x^m log x``,
    and the free ``x^m`` coefficient is left at zero.
    """
    N = source.order
    c = source.array
    sup = source.support
    terms = {}
    for K in range(N + 1):
        has_plain, has_log = bool(sup[K, 0]), bool(sup[K, 1])
        if not (has_plain or has_log):
            continue
        a, b = c[K, 0], c[K, 1]
        p = indicial_polynomial(K, m)
        dp = 2 * K + 1 - m
        if p != 0:
            if has_log:
                d = b / p
                terms[(K, True)] = d
                terms[(K, False)] = (a - dp * d) / p
            else:
                terms[(K, False)] = a / p
        else:
            if has_log and np.any(b != 0):
                raise SeriesError(f"log source at the resonant order {K}")
            terms[(K, True)] = a / (m + 1)
    P = source.P
    out = PhgSeries.from_terms({k: (v if source.grid else v[0]) for k, v in terms.items()},
                               N, P=P, m=source.m, codim1=source.codim1)
    if not terms:
        return PhgSeries.zeros(N, P, m=source.m, codim1=source.codim1)
    return out


# ---------------------------------------------------------------- geometry
def _dot(v, w):
    out = v[0] * w[0]
    for a, b in zip(v[1:], w[1:]):
        out = out + a * b
    return out


def _axpy(alpha, v, w):
    """Vector ``w - alpha * v`` componentwise."""
    return [wi - alpha * vi for vi, wi in zip(v, w)]


def _scale(alpha, v):
    return [alpha * vi for vi in v]


@dataclass
class _CurveFrame:
    """Tangent vectors of the graph over a curve in the frame (T, N_1.., e_x)."""

    Gs: list
    Gx: list
    a: PhgSeries
    b: list
    gss: PhgSeries
    gsx: PhgSeries
    gxx: PhgSeries
    det: PhgSeries
    idet: PhgSeries

    @property
    def hss(self):
        return self.gxx * self.idet

    @property
    def hsx(self):
        return -(self.gsx * self.idet)

    @property
    def hxx(self):
        return self.gss * self.idet


def _ds(series, bdy):
    return series.d_s(bdy.length, bdy.derivative)


def _curve_frame(u, bdy: CurveBoundary):
    ncomp = bdy.n - 1
    kap = [bdy.kappa[:, i] for i in range(ncomp)]
    tau = bdy.twist
    a = 1.0 - sum((u[j] * kap[j] for j in range(ncomp)), PhgSeries.zeros(u[0].order))
    b = []
    for k in range(ncomp):
        bk = _ds(u[k], bdy)
        for j in range(ncomp):
            if tau[j, k] != 0:
                bk = bk + tau[j, k] * u[j]
        b.append(bk)
    ux = [ui.d_x() for ui in u]
    zero = PhgSeries.zeros(u[0].order)
    one = PhgSeries.constant(1.0, u[0].order)
    Gs = [a] + b + [zero]
    Gx = [zero] + ux + [one]
    gss = _dot(Gs, Gs)
    gsx = _dot(Gs, Gx)
    gxx = _dot(Gx, Gx)
    det = gss * gxx - gsx * gsx
    return _CurveFrame(Gs, Gx, a, b, gss, gsx, gxx, det, det.invert())


def _curve_mean_curvature(u, bdy: CurveBoundary, m):
    ncomp = bdy.n - 1
    kap = [bdy.kappa[:, i] for i in range(ncomp)]
    tau = bdy.twist
    fr = _curve_frame(u, bdy)
    a, b = fr.a, fr.b
    # second derivatives of G in the moving frame
    a_s = _ds(a, bdy)
    Gss_T = a_s - sum((b[k] * kap[k] for k in range(ncomp)), PhgSeries.zeros(a.order))
    Gss_N = []
    for l in range(ncomp):
        comp = a * kap[l] + _ds(b[l], bdy)
        for k in range(ncomp):
            if tau[k, l] != 0:
                comp = comp + tau[k, l] * b[k]
        Gss_N.append(comp)
    Gsx_T = a.d_x()
    Gsx_N = [bk.d_x() for bk in b]
    Gxx_N = [ui.d_x().d_x() for ui in u]
    hss, hsx, hxx = fr.hss, fr.hsx, fr.hxx
    A = [hss * Gss_T + 2.0 * (hsx * Gsx_T)]
    for l in range(ncomp):
        A.append(hss * Gss_N[l] + 2.0 * (hsx * Gsx_N[l]) + hxx * Gxx_N[l])
    W = [comp.shift(1) for comp in A] + [PhgSeries.constant(float(m), A[0].order + 1)]
    ws = _dot(W, fr.Gs)
    wx = _dot(W, fr.Gx)
    cs = hss * ws + hsx * wx
    cx = hsx * ws + hxx * wx
    Wp = _axpy(cx, fr.Gx, _axpy(cs, fr.Gs, W))
    return [Wp[1 + l].shift(1) for l in range(ncomp)]


def _sphere_profile(u0: PhgSeries, bdy: RoundSphere):
    r = u0 + bdy.R
    rp = u0.d_x()
    W2 = 1.0 + rp * rp
    return r, rp, W2


def _sphere_mean_curvature(u, bdy: RoundSphere, m):
    r, rp, W2 = _sphere_profile(u[0], bdy)
    rpp = rp.d_x()
    iW2 = W2.invert()
    inner = rpp.shift(1) * iW2 - (m - 1) * r.invert().shift(1) - m * rp
    H0 = (inner * iW2).shift(1)
    rest = [PhgSeries.zeros(H0.order) for _ in u[1:]]
    return [H0] + rest


def _infer_dims(boundary, m, n):
    if isinstance(boundary, CurveBoundary):
        m_b, n_b = 2, boundary.n
    elif isinstance(boundary, RoundSphere):
        m_b, n_b = boundary.dim + 1, boundary.n
    else:
        raise TypeError("unsupported boundary type")
    m = m_b if m is None else int(m)
    n = n_b if n is None else int(n)
    if m != m_b or n != n_b:
        raise ValueError(f"boundary fixes (m, n) = ({m_b}, {n_b}); got ({m}, {n})")
    if not 2 <= m <= n:
        raise ValueError("need 2 <= m <= n")
    return m, n


def mean_curvature_series(u, boundary, m=None, n=None):
    """Normal-frame components of the hyperbolic mean curvature of the graph of u."""
    m, n = _infer_dims(boundary, m, n)
    u = list(u)
    for ui in u:
        if ui.order < 2:
            raise SeriesError("truncation order too low (need N >= 2)")
    if isinstance(boundary, CurveBoundary):
        H = _curve_mean_curvature(u, boundary, m)
    else:
        H = _sphere_mean_curvature(u, boundary, m)
    return [h.with_meta(m, m == n) for h in H]


# ----------------------------------------------------------- the expansion
@dataclass(frozen=True, eq=False)
class GraphExpansion:
    boundary: object
    m: int
    n: int
    order: int
    u: tuple
    neumann: np.ndarray
    log_coefficient: np.ndarray
    h_ab: PhgSeries
    h_ax: PhgSeries
    h_xx: PhgSeries
    q: PhgSeries
    hinv_ab: PhgSeries
    hinv_ax: PhgSeries
    hinv_xx: PhgSeries
    c_z: PhgSeries = None
    c_x: PhgSeries = None
    c_a: PhgSeries = None
    omega: PhgSeries = None
    residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def codim1(self):
        return self.m == self.n

    @property
    def grid(self):
        return isinstance(self.boundary, CurveBoundary)

    def coefficient(self, k, log=False, component=0):
        return self.u[component].coeff(k, log)

    @property
    def u2(self):
        return self.coefficient(2)

    @property
    def u_neumann(self):
        return self.coefficient(self.m + 1)

    def to_dict(self):
        def ser(s):
            return None if s is None else s.to_dict()

        bdy = self.boundary.report()
        out = {"m": self.m, "n": self.n, "order": self.order, "boundary": bdy,
               "u": [ser(s) for s in self.u],
               "h_ab": ser(self.h_ab), "h_ax": ser(self.h_ax), "h_xx": ser(self.h_xx),
               "sqrt_det_h": ser(self.q), "hinv_ab": ser(self.hinv_ab),
               "hinv_ax": ser(self.hinv_ax), "hinv_xx": ser(self.hinv_xx),
               "normal": None if self.c_z is None else
               {"c_z": ser(self.c_z), "c_x": ser(self.c_x), "c_a": ser(self.c_a)},
               "omega": ser(self.omega), "residual": self.residual}
        return out


def _neumann_components(neumann, ncomp, P):
    if neumann is None:
        return [0.0] * ncomp
    arr = np.asarray(neumann, dtype=float)
    if P is None:
        arr = np.atleast_1d(arr)
        if arr.size == 1:
            return [float(arr[0])] + [0.0] * (ncomp - 1)
        if arr.size != ncomp:
            raise ValueError("neumann data has the wrong number of components")
        return [float(v) for v in arr]
    if arr.ndim == 0:
        return [np.full(P, float(arr))] + [np.zeros(P)] * (ncomp - 1)
    if arr.ndim == 1:
        if arr.shape[0] != P:
            raise ValueError("neumann grid length mismatch")
        return [arr] + [np.zeros(P)] * (ncomp - 1)
    if arr.shape == (ncomp, P):
        return list(arr)
    if arr.shape == (P, ncomp):
        return list(arr.T)
    raise ValueError("neumann data has an unsupported shape")


def _order_coefficients(series, k):
    return series.array[k, 0], series.array[k, 1]


def solve_graph_orders(residual_fn, u, m, k_range, inject, scale, tol=RESIDUAL_TOL):
    """Generic order-by-order solve driven by the indicial operator.

    ``residual_fn(u)`` returns the list of normal components of the
    equation; the leading part of its response to a correction ``x w`` is
    ``x I(w)``.  ``inject(k, u)`` may modify u after order k is solved
    (free data at resonant orders).  Returns the updated list u.
    """
    u = list(u)
    m_even = m % 2 == 0
    for k in k_range:
        H = residual_fn(u)
        for i, h in enumerate(H):
            low = h.array[:k]
            if low.size and np.max(np.abs(low)) > tol * scale:
                bad = int(np.argmax(np.max(np.abs(low), axis=(1, 2)) > tol * scale))
                raise ExpansionError(
                    f"residual at order {bad} did not vanish after its correction")
            a, b = _order_coefficients(h, k)
            K = k - 1
            plain = np.max(np.abs(a)) > tol * scale * 1e-4
            logged = np.max(np.abs(b)) > tol * scale * 1e-4
            if K == m and m_even and not plain:
                continue
            if K == m and not m_even:
                plain = True
            if not (plain or logged):
                continue
            terms = {}
            if plain:
                terms[(K, False)] = -a if h.grid else -a[0]
            if logged:
                terms[(K, True)] = -b if h.grid else -b[0]
            src = PhgSeries.from_terms(terms, u[i].order - 1, P=h.P, m=m)
            u[i] = u[i] + solve_indicial(src, m).shift(1)
        u = inject(k, u)
    return u


def _metric_curve(u, bdy, m, n):
    fr = _curve_frame(u, bdy)
    meta = dict(m=m, codim1=m == n)
    q = fr.det.sqrt()
    out = dict(h_ab=fr.gss, h_ax=fr.gsx, h_xx=fr.gxx, q=q,
               hinv_ab=fr.hss, hinv_ax=fr.hsx, hinv_xx=fr.hxx)
    if m == n:
        N = [PhgSeries.zeros(fr.a.order)] * len(fr.Gs)
        N = list(N)
        N[1] = PhgSeries.constant(1.0, fr.a.order)
        ns, nx = _dot(N, fr.Gs), _dot(N, fr.Gx)
        cs = fr.hss * ns + fr.hsx * nx
        cx = fr.hsx * ns + fr.hxx * nx
        nu = _axpy(cx, fr.Gx, _axpy(cs, fr.Gs, N))
        inv_norm = _dot(nu, nu).sqrt().invert()
        out["c_z"] = nu[1] * inv_norm
        out["c_x"] = nu[-1] * inv_norm
        out["c_a"] = nu[0] * inv_norm * fr.a.invert()
    return {k: v.with_meta(**meta) for k, v in out.items()}


def _metric_sphere(u, bdy, m, n):
    r, rp, W2 = _sphere_profile(u[0], bdy)
    rho = r * (1.0 / bdy.R)
    meta = dict(m=m, codim1=m == n)
    zero = PhgSeries.zeros(rp.order)
    W = W2.sqrt()
    iW = W.invert()
    out = dict(h_ab=rho * rho, h_ax=zero, h_xx=W2, q=(rho ** (m - 1)) * W,
               hinv_ab=(rho * rho).invert(), hinv_ax=zero, hinv_xx=W2.invert())
    if m == n:
        out["c_z"] = iW
        out["c_x"] = -(rp * iW)
        out["c_a"] = zero
    return {k: v.with_meta(**meta) for k, v in out.items()}


def metric_series(u, boundary, m=None, n=None):
    m, n = _infer_dims(boundary, m, n)
    if isinstance(boundary, CurveBoundary):
        return _metric_curve(list(u), boundary, m, n)
    return _metric_sphere(list(u), boundary, m, n)


def expand_minimal_graph(boundary, m=None, n=None, neumann=None, order=None,
                         *, tol=RESIDUAL_TOL, with_omega=True):
    """Solve the minimal-graph equation order by order up to ``x^order``.

    ``neumann`` supplies the free coefficient of ``x^{m+1}`` (scalar,
    grid, or one entry per normal component).
    """
    m, n = _infer_dims(boundary, m, n)
    N = m + 4 if order is None else int(order)
    if N < m + 2:
        raise ValueError(f"order must be at least m + 2 = {m + 2}")
    grid = isinstance(boundary, CurveBoundary)
    P = boundary.P if grid else None
    ncomp = n - 1 if grid else n - boundary.dim
    meta = dict(m=m, codim1=m == n)
    u = [PhgSeries.zeros(N, P, **meta) for _ in range(ncomp)]
    data = _neumann_components(neumann, ncomp, P)
    Hg = boundary.mean_curvature()
    scale = max(1.0, float(np.max(np.abs(Hg))))

    def inject(k, u):
        if k != m + 1:
            return u
        return [ui + PhgSeries.monomial(m + 1, N, coeff=d, P=P, **meta)
                for ui, d in zip(u, data)]

    def residual(u):
        return mean_curvature_series(u, boundary, m, n)

    u = solve_graph_orders(residual, u, m, range(1, N + 1), inject, scale, tol)
    H = residual(u)
    res = max(float(np.max(np.abs(h.array[:N]))) for h in H)
    umax = max(max(ui.max_abs() for ui in u), 1.0)
    if res > tol * umax * scale:
        raise ExpansionError(f"final residual {res:.3e} exceeds tolerance")
    u = [ui.with_meta(**meta) for ui in u]
    metric = metric_series(u, boundary, m, n)
    logc = np.array([ui.coeff(m + 1, True) for ui in u]) if m % 2 == 1 else None
    g = GraphExpansion(boundary=boundary, m=m, n=n, order=N, u=tuple(u),
                       neumann=np.array(data, dtype=float), log_coefficient=logc,
                       residual=res, **metric)
    if with_omega:
        g = _replace(g, omega=special_bdf(g))
    return g


def _replace(g, **changes):
    from dataclasses import replace
    return replace(g, **changes)


def normal_series(g: GraphExpansion):
    if not g.codim1:
        raise ValueError("the normal expansion requires codimension one")
    return g.c_z, g.c_x, g.c_a


def special_bdf(g: GraphExpansion, order=None, tol=RESIDUAL_TOL) -> PhgSeries:
    """Series omega with |d log(x e^omega)|_{hbar x^-2} = 1 order by order."""
    N = g.hinv_xx.order if order is None else int(order)
    if N > g.hinv_xx.order:
        raise ValueError(f"order budget exceeded: metric known to order {g.hinv_xx.order}")
    hxx = g.hinv_xx.truncate(N)
    hax = g.hinv_ax.truncate(N)
    hab = g.hinv_ab.truncate(N)
    grid = g.grid
    bdy = g.boundary
    P = bdy.P if grid else None
    meta = dict(m=g.m, codim1=g.codim1)

    def residual(w):
        dx = 1.0 + x_dx(w)
        out = hxx * dx * dx - 1.0
        if grid:
            ds = _ds(w, bdy).shift(1).truncate(N)
            out = out + 2.0 * (hax * dx * ds) + hab * ds * ds
        return out

    w = PhgSeries.zeros(N, P, **meta)
    for k in range(1, N + 1):
        r = residual(w)
        low = r.array[:k]
        if np.max(np.abs(low)) > tol:
            raise ExpansionError("special bdf residual did not vanish")
        a, b = r.array[k, 0], r.array[k, 1]
        terms = {}
        if np.any(a != 0):
            terms[(k, False)] = -0.5 * (a if grid else a[0])
        if r.support[k, 1]:
            terms[(k, True)] = -0.5 * (b if grid else b[0])
        if terms:
            w = w + inverse_x_dx(PhgSeries.from_terms(terms, N, P=P, **meta))
    return w.with_meta(**meta)


def special_bdf_residual(g: GraphExpansion, omega: PhgSeries) -> PhgSeries:
    N = omega.order
    dx = 1.0 + x_dx(omega)
    out = g.hinv_xx.truncate(N) * dx * dx - 1.0
    if g.grid:
        ds = _ds(omega, g.boundary).shift(1).truncate(N)
        out = out + 2.0 * (g.hinv_ax * dx * ds) + g.hinv_ab * ds * ds
    return out


def hxx_plus_q_coefficient(g: GraphExpansion, trace_slot=0.0, tol=1e-6):
    """Series value of [hbar^{xx}]_{n+1} + [sqrt det hbar]_{n+1} and its closed form.

    The closed form ``(n-1)(n-2) - 8(n-1) u_2 u_{n+1} + trace`` is asserted
    only for n = 2; for n > 2 both values are reported.
    """
    if not g.codim1:
        raise ValueError("requires codimension one")
    n = g.n
    if g.hinv_xx.order < n + 1:
        raise ValueError(f"series order {g.hinv_xx.order} < n + 1")
    series_val = g.hinv_xx.coeff(n + 1) + g.q.coeff(n + 1)
    u2 = g.u[0].coeff(2)
    un = g.u[0].coeff(n + 1)
    closed = (n - 1) * (n - 2) - 8 * (n - 1) * u2 * un + trace_slot
    diff = float(np.max(np.abs(np.asarray(series_val) - np.asarray(closed))))
    asserted = n == 2
    if asserted and diff > tol:
        raise ExpansionError(f"closed form mismatch {diff:.3e} for n = 2")
    return {"series": series_val, "closed_form": closed, "difference": diff,
            "asserted": asserted}
