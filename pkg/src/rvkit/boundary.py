"""Discretized boundary submanifolds of the flat boundary R^n of half-space.

Two kinds of boundary are supported:

* :class:`CurveBoundary` -- a smooth closed curve sampled uniformly in
  arclength, with a rotation-minimizing (Bishop) normal frame.
* :class:`RoundSphere` -- a round sphere S^{d}(R) in R^n handled in
  symmetric mode, where every coefficient is a scalar.

Sign convention: normals point outward.  For a planar curve the first
normal is the outward normal of the enclosed region; the mean curvature
vector of a circle of radius R then has component -1/R along it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm

from .phg import periodic_derivative


class BoundaryError(ValueError):
    """Invalid boundary input."""


def sphere_area(d: int) -> float:
    """Area of the unit d-sphere S^d in R^{d+1}."""
    return 2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


@dataclass(frozen=True, eq=False)
class CurveBoundary:
    points: np.ndarray       # (P, n)
    tangent: np.ndarray      # (P, n)
    normals: np.ndarray      # (P, n-1, n)
    kappa: np.ndarray        # (P, n-1) curvature components in the frame
    twist: np.ndarray        # (n-1, n-1) constant normal connection, N_i' = -k_i T + twist[i, j] N_j
    length: float
    derivative: str = "spectral"
    mode: str = field(default="curve", init=False)

    @property
    def P(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[1]

    @property
    def dim(self):
        return 1

    @property
    def s(self):
        return self.length * np.arange(self.P) / self.P

    @property
    def weights(self):
        return np.full(self.P, self.length / self.P)

    @property
    def volume(self):
        return self.length

    def mean_curvature(self):
        """Curvature vector components in the normal frame, shape (P, n-1)."""
        return self.kappa

    def d_s(self, values):
        return periodic_derivative(values, self.length, self.derivative)

    def integrate(self, f):
        f = np.asarray(f)
        if f.ndim == 0:
            return float(f) * self.length
        if f.shape[-1] != self.P:
            raise BoundaryError(f"grid mismatch: {f.shape[-1]} samples vs {self.P}")
        return f @ self.weights

    def l2_inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def report(self):
        k = np.linalg.norm(self.kappa, axis=1)
        return {"mode": "curve", "n": self.n, "samples": self.P,
                "length": self.length, "curvature_min": float(k.min()),
                "curvature_max": float(k.max()),
                "frame_twist": float(np.linalg.norm(self.twist))}


@dataclass(frozen=True, eq=False)
class RoundSphere:
    R: float
    n: int
    dim: int = None
    mode: str = field(default="sphere", init=False)

    def __post_init__(self):
        if self.dim is None:
            object.__setattr__(self, "dim", self.n - 1)
        if self.R <= 0:
            raise BoundaryError("radius must be positive")
        if not 1 <= self.dim <= self.n - 1:
            raise BoundaryError("sphere dimension must lie in [1, n-1]")

    @property
    def P(self):
        return None

    @property
    def volume(self):
        return sphere_area(self.dim) * self.R ** self.dim

    def mean_curvature(self):
        """Outward radial component first, then zeros for extra normals."""
        out = np.zeros(self.n - self.dim)
        out[0] = -self.dim / self.R
        return out

    def integrate(self, f):
        f = np.asarray(f)
        if f.ndim != 0 and f.size != 1:
            raise BoundaryError("round sphere integrates scalars only")
        return float(np.real_if_close(f.reshape(-1)[0])) * self.volume

    def l2_inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def report(self):
        return {"mode": "sphere", "n": self.n, "dim": self.dim, "R": self.R,
                "volume": self.volume, "mean_curvature": -self.dim / self.R}


# --------------------------------------------------------------- curves
def _fourier_eval(coef, t):
    """Evaluate a trigonometric interpolant (fft coefficients) at points t."""
    P = coef.shape[0]
    k = np.fft.fftfreq(P, d=1.0 / P)
    coef = np.array(coef)
    nyq = None
    if P % 2 == 0:
        nyq = coef[P // 2].copy()
        coef[P // 2] = 0.0
    out = np.exp(1j * np.outer(t, k)) @ coef / P
    if nyq is not None:
        out = out + np.multiply.outer(np.cos(P / 2 * t), nyq) / P
    return out.real


def _segments_intersect_2d(points):
    P = points.shape[0]
    a = points
    b = np.roll(points, -1, axis=0)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    i, j = np.triu_indices(P, k=2)
    keep = ~((i == 0) & (j == P - 1))
    i, j = i[keep], j[keep]
    box = np.all((lo[i] <= hi[j]) & (lo[j] <= hi[i]), axis=1)
    i, j = i[box], j[box]
    if i.size == 0:
        return False
    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


def _near_self_contact(points, spacing):
    P = points.shape[0]
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    idx = np.arange(P)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, P - gap)
    return bool(np.any(d[gap > 3] < 0.25 * spacing))


def _resample_arclength(samples, P_out):
    """Uniform-arclength resampling of a periodic trigonometric interpolant."""
    P_in = samples.shape[0]
    coef = np.fft.fft(samples, axis=0)
    k = np.fft.fftfreq(P_in, d=1.0 / P_in)
    if P_in % 2 == 0:
        k[P_in // 2] = 0.0
    dcoef = 1j * k[:, None] * coef
    fine = 8 * max(P_in, P_out)
    t_fine = 2 * np.pi * np.arange(fine) / fine
    speed_fine = np.linalg.norm(_fourier_eval(dcoef, t_fine), axis=1)
    if np.min(speed_fine) <= 1e-12 * np.max(speed_fine):
        raise BoundaryError("degenerate parameterization (zero speed)")
    # arclength s(t) as a trigonometric series of the speed, integrated termwise
    sc = np.fft.fft(speed_fine)
    kf = np.fft.fftfreq(fine, d=1.0 / fine)
    mean_speed = sc[0].real / fine
    L = 2 * np.pi * mean_speed
    integ = np.zeros_like(sc)
    nz = kf != 0
    integ[nz] = sc[nz] / (1j * kf[nz])

    def arclength(t):
        return mean_speed * t + _fourier_eval(integ, np.atleast_1d(t)) - _fourier_eval(integ, np.zeros(1))

    def speed(t):
        return np.linalg.norm(_fourier_eval(dcoef, np.atleast_1d(t)), axis=1)

    target = L * np.arange(P_out) / P_out
    t = 2 * np.pi * np.arange(P_out) / P_out
    for _ in range(50):
        step = (arclength(t) - target) / speed(t)
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return _fourier_eval(coef, t), L


def _planar_basis(points, tol=1e-9):
    centered = points - points.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=True)
    scale = sv[0] if sv[0] > 0 else 1.0
    if sv.shape[0] > 2 and np.max(sv[2:]) > tol * scale:
        return None
    return vt


def _double_reflection(points, tangent, start):
    """Discrete rotation-minimizing transport of the frame ``start`` (k, n)."""
    P = points.shape[0]
    frames = np.zeros((P + 1,) + start.shape)
    frames[0] = start
    for i in range(P):
        j = (i + 1) % P
        v1 = points[j] - points[i]
        c1 = v1 @ v1
        r_l = frames[i] - (2 / c1) * np.outer(frames[i] @ v1, v1)
        t_l = tangent[i] - (2 / c1) * (v1 @ tangent[i]) * v1
        v2 = tangent[j] - t_l
        c2 = v2 @ v2
        if c2 < 1e-300:
            frames[i + 1] = r_l
        else:
            frames[i + 1] = r_l - (2 / c2) * np.outer(r_l @ v2, v2)
    return frames


def _orthonormal_complement(T, n):
    basis = np.eye(n)
    out = []
    for e in basis:
        v = e - (e @ T) * T
        for w in out:
            v = v - (v @ w) * w
        if np.linalg.norm(v) > 1e-6:
            out.append(v / np.linalg.norm(v))
        if len(out) == n - 1:
            break
    return np.array(out)


def build_curve(samples, P=None, derivative="spectral"):
    """Build a :class:`CurveBoundary` from points sampled along a closed curve.

    The samples must be ordered and equally spaced in some smooth periodic
    parameter (the closing point is not repeated).  The curve is resampled
    to ``P`` points uniform in arclength.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise BoundaryError("samples must be an array of points in R^n, n >= 2")
    if np.allclose(pts[0], pts[-1]) and pts.shape[0] > 2:
        pts = pts[:-1]
    if pts.shape[0] < 16:
        raise BoundaryError("at least 16 samples are required")
    n = pts.shape[1]
    P = pts.shape[0] if P is None else int(P)
    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if np.sum(chords) <= 0 or np.min(chords) <= 1e-14 * np.sum(chords):
        raise BoundaryError("degenerate curve (zero-length or repeated samples)")
    spacing = np.sum(chords) / pts.shape[0]
    if n == 2:
        if _segments_intersect_2d(pts):
            raise BoundaryError("curve self-intersects")
    elif _near_self_contact(pts, spacing):
        raise BoundaryError("curve self-intersects (near contact)")

    points, L = _resample_arclength(pts, P)
    d = lambda v: periodic_derivative(v.T, L, derivative).T  # noqa: E731
    T = d(points)
    T = T / np.linalg.norm(T, axis=1)[:, None]
    kvec = d(T)

    basis = _planar_basis(points)
    if n == 2 or basis is not None:
        if n == 2:
            e1, e2 = np.eye(2)
            extra = np.zeros((0, 2))
        else:
            e1, e2 = basis[0], basis[1]
            extra = basis[2:]
        p2 = np.stack([points @ e1, points @ e2], axis=1)
        t2 = np.stack([T @ e1, T @ e2], axis=1)
        area = 0.5 * np.sum(p2[:, 0] * np.roll(p2[:, 1], -1) - np.roll(p2[:, 0], -1) * p2[:, 1])
        sign = 1.0 if area > 0 else -1.0
        # outward normal: rotate the tangent clockwise for a counter-clockwise curve
        out2 = sign * np.stack([t2[:, 1], -t2[:, 0]], axis=1)
        N1 = out2[:, :1] * e1 + out2[:, 1:] * e2
        normals = np.concatenate(
            [N1[:, None, :], np.broadcast_to(extra, (P,) + extra.shape)], axis=1)
        twist = np.zeros((n - 1, n - 1))
    else:
        kn = np.linalg.norm(kvec[0])
        if kn > 1e-10:
            first = -kvec[0] / kn
            rest = _orthonormal_complement(T[0], n)
            start = [first]
            for v in rest:
                w = v - sum((v @ f) * f for f in start)
                if np.linalg.norm(w) > 1e-6 and len(start) < n - 1:
                    start.append(w / np.linalg.norm(w))
            start = np.array(start)
        else:
            start = _orthonormal_complement(T[0], n)
        frames = _double_reflection(points, T, start)
        # holonomy: frames[P] = H @ frames[0] within the normal space at s = 0
        hol = frames[P] @ start.T            # (n-1, n-1)
        u, _, vt = np.linalg.svd(hol)
        hol = u @ vt
        gen = np.real(logm(hol))
        gen = 0.5 * (gen - gen.T)
        s = L * np.arange(P) / P
        normals = np.empty((P, n - 1, n))
        for i in range(P):
            normals[i] = expm(-gen * s[i] / L) @ frames[i]
        # re-orthonormalize against the tangent
        for i in range(P):
            q = normals[i] - np.outer(normals[i] @ T[i], T[i])
            qq, _ = np.linalg.qr(q.T)
            signs = np.sign(np.sum(qq.T * q, axis=1))
            normals[i] = (qq * signs).T
        dN = periodic_derivative(np.transpose(normals, (1, 2, 0)), L, derivative)
        dN = np.transpose(dN, (2, 0, 1))
        twist = np.einsum("pik,pjk->ij", dN, normals) / P
        twist = 0.5 * (twist - twist.T)
    kappa = np.einsum("pk,pik->pi", kvec, normals)
    return CurveBoundary(points=points, tangent=T, normals=normals, kappa=kappa,
                         twist=twist, length=float(L), derivative=derivative)


def circle(R=1.0, P=128, n=2, center=None):
    t = 2 * np.pi * np.arange(P) / P
    pts = np.zeros((P, n))
    pts[:, 0] = R * np.cos(t)
    pts[:, 1] = R * np.sin(t)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return build_curve(pts, P)


def ellipse(a=2.0, b=1.0, P=128, n=2):
    t = 2 * np.pi * np.arange(P) / P
    pts = np.zeros((P, n))
    pts[:, 0] = a * np.cos(t)
    pts[:, 1] = b * np.sin(t)
    return build_curve(pts, P)


def mean_curvature(b):
    return b.mean_curvature()


def integrate(b, f):
    return b.integrate(f)


def l2_inner(b, f, g):
    return b.l2_inner(f, g)


def load_boundary(desc):
    """Boundary from a dict: ``{"R": r, "n": n}`` or ``{"points": [...]}``."""
    if isinstance(desc, str):
        with open(desc) as fh:
            text = fh.read()
        if desc.endswith(".csv"):
            pts = np.loadtxt(desc, delimiter=",", ndmin=2)
            return build_curve(pts)
        desc = json.loads(text)
    if "points" in desc:
        return build_curve(np.asarray(desc["points"], dtype=float), desc.get("P"))
    if "R" in desc:
        return RoundSphere(float(desc["R"]), int(desc["n"]), desc.get("dim"))
    raise BoundaryError("boundary description needs 'points' or 'R'/'n'")
