"""Truncated polyhomogeneous series in a boundary defining function ``x``.

A :class:`PhgSeries` stores

    f(s, x) = sum_{k=0}^{N} ( f_{k,0}(s) x^k + f_{k,1}(s) x^k log x )

where each coefficient is either a scalar or a vector of samples on a
periodic boundary grid.  Only log powers 0 and 1 are representable; a
product that would keep a non-negligible ``log^2`` term inside the
truncation order raises :class:`LogOverflowError`.

Besides the coefficient array every series carries a boolean *support*
mask recording which ``(k, log)`` slots have been produced structurally.
A slot may be present with a numerically zero value (for instance the
log coefficient of an odd-dimensional round hemisphere); the mask keeps
that information while arithmetic stays dense.

Coefficients may be complex.  Nothing in this module relies on realness,
which lets callers differentiate series-valued maps by the complex-step
trick.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Mapping

import numpy as np

EVEN = 1
ODD = -1
NEGLIGIBLE = 0
UNDEFINED = None

PARITY_TOL = 1e-9


class SeriesError(ValueError):
    """Invalid series operation (order, grid or domain violation)."""


class LogOverflowError(SeriesError):
    """A product produced a log^2 term inside the truncation order."""


def _as_coeff_array(c, P):
    arr = np.asarray(c)
    if arr.ndim == 0:
        return arr.reshape(1)
    if arr.ndim != 1:
        raise SeriesError("coefficients must be scalars or 1-d grids")
    if P is not None and arr.shape[0] != P:
        raise SeriesError(f"grid length {arr.shape[0]} does not match {P}")
    return arr


class PhgSeries:
    """Immutable truncated series ``sum c[k, t] x^k (log x)^t``."""

    __slots__ = ("_c", "_support", "order", "m", "codim1", "grid")

    def __init__(self, coeffs, support=None, *, m=None, codim1=False, grid=None):
        c = np.array(coeffs)
        if c.ndim == 2:
            c = c[:, :, None]
        if c.ndim != 3 or c.shape[1] != 2:
            raise SeriesError("coefficient array must have shape (N+1, 2, P)")
        if not np.issubdtype(c.dtype, np.complexfloating):
            c = c.astype(float)
        if not np.all(np.isfinite(c)):
            raise SeriesError("non-finite coefficient")
        if grid is None:
            grid = c.shape[2] > 1
        if not grid and c.shape[2] != 1:
            raise SeriesError("scalar series must have a single sample")
        if support is None:
            support = np.any(c != 0, axis=2)
        else:
            support = np.array(support, dtype=bool)
            if support.shape != c.shape[:2]:
                raise SeriesError("support mask shape mismatch")
        c.setflags(write=False)
        support.setflags(write=False)
        self._c = c
        self._support = support
        self.order = c.shape[0] - 1
        self.m = m
        self.codim1 = bool(codim1)
        self.grid = bool(grid)

    # ------------------------------------------------------------------ build
    @classmethod
    def zeros(cls, order, P=None, **meta):
        n = 1 if P is None else P
        return cls(np.zeros((order + 1, 2, n)), grid=P is not None, **meta)

    @classmethod
    def constant(cls, value, order, P=None, **meta):
        return cls.from_terms({(0, False): value}, order, P=P, **meta)

    @classmethod
    def monomial(cls, k, order, coeff=1.0, log=False, P=None, **meta):
        return cls.from_terms({(k, log): coeff}, order, P=P, **meta)

    @classmethod
    def from_terms(cls, terms: Mapping, order, P=None, **meta):
        """Build from ``{(k, log): coeff}``; terms above ``order`` are dropped."""
        arrays = {key: _as_coeff_array(v, P) for key, v in terms.items()}
        for a in arrays.values():
            if a.shape[0] > 1:
                if P is None:
                    P = a.shape[0]
                elif P != a.shape[0]:
                    raise SeriesError("grid length mismatch between terms")
        n = 1 if P is None else P
        dtype = np.result_type(float, *arrays.values()) if arrays else float
        c = np.zeros((order + 1, 2, n), dtype=dtype)
        sup = np.zeros((order + 1, 2), dtype=bool)
        for (k, log), a in arrays.items():
            if k < 0:
                raise SeriesError("negative exponents are not representable")
            if k > order:
                continue
            c[k, int(log)] = a
            sup[k, int(log)] = True
        return cls(c, sup, grid=P is not None, **meta)

    def _new(self, c, support, other=None):
        m = self.m if self.m is not None or other is None else other.m
        codim1 = self.codim1 or (other is not None and other.codim1)
        grid = self.grid or (other is not None and other.grid)
        return PhgSeries(c, support, m=m, codim1=codim1, grid=grid)

    def with_meta(self, m=None, codim1=None):
        return PhgSeries(self._c, self._support,
                         m=self.m if m is None else m,
                         codim1=self.codim1 if codim1 is None else codim1,
                         grid=self.grid)

    # ------------------------------------------------------------- accessors
    @property
    def P(self):
        return self._c.shape[2] if self.grid else None

    @property
    def array(self):
        """Read-only coefficient array of shape (N+1, 2, P)."""
        return self._c

    @property
    def support(self):
        return self._support

    @property
    def is_complex(self):
        return np.iscomplexobj(self._c)

    def coeff(self, k, log=False):
        if k > self.order:
            raise SeriesError(f"order {k} exceeds truncation order {self.order}")
        if k < 0:
            raise SeriesError("negative exponent")
        v = self._c[k, int(log)]
        return v if self.grid else v[0]

    def has_term(self, k, log=False):
        return k <= self.order and bool(self._support[k, int(log)])

    def terms(self):
        """Present terms as ``[(k, log, coeff)]`` in increasing order."""
        out = []
        for k in range(self.order + 1):
            for t in (0, 1):
                if self._support[k, t]:
                    out.append((k, bool(t), self.coeff(k, bool(t))))
        return out

    def max_abs(self):
        return float(np.max(np.abs(self._c))) if self._c.size else 0.0

    def real(self):
        return self._new(self._c.real, self._support)

    def imag(self):
        return self._new(self._c.imag, self._support)

    def evaluate(self, x):
        """Evaluate at ``x > 0`` (scalar); returns a scalar or grid vector."""
        x = float(x)
        k = np.arange(self.order + 1)
        powers = x ** k
        val = powers @ self._c[:, 0] + (powers * math.log(x)) @ self._c[:, 1]
        return val if self.grid else val[0]

    def lowest_order(self, tol=0.0):
        """Smallest ``k`` with a coefficient above ``tol`` (absolute), or None."""
        mags = np.max(np.abs(self._c), axis=(1, 2))
        idx = np.nonzero(mags > tol)[0]
        return int(idx[0]) if idx.size else None

    # ------------------------------------------------------------ arithmetic
    def _coerce(self, other):
        if isinstance(other, PhgSeries):
            return other
        arr = np.asarray(other)
        if arr.ndim == 0 or arr.ndim == 1:
            return PhgSeries.from_terms({(0, False): arr}, self.order,
                                        P=arr.shape[0] if arr.ndim == 1 else None)
        return NotImplemented

    def _check_grid(self, other):
        if self.grid and other.grid and self.P != other.P:
            raise SeriesError(f"grid length mismatch: {self.P} vs {other.P}")

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check_grid(other)
        N = min(self.order, other.order)
        c = self._c[:N + 1] + other._c[:N + 1]
        sup = self._support[:N + 1] | other._support[:N + 1]
        return self._new(c, sup, other)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self._c, self._support)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PhgSeries):
            return mul(self, other)
        arr = np.asarray(other)
        if arr.ndim == 0 or (arr.ndim == 1 and (not self.grid or arr.shape[0] == self.P)):
            c = self._c * (arr if arr.ndim == 0 else arr[None, None, :])
            return PhgSeries(c, self._support, m=self.m, codim1=self.codim1,
                             grid=self.grid or arr.ndim == 1)
        if arr.ndim == 1:
            raise SeriesError(f"grid length mismatch: {self.P} vs {arr.shape[0]}")
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PhgSeries):
            return mul(self, other.invert())
        return self * (1.0 / np.asarray(other))

    def __pow__(self, p):
        if not isinstance(p, int) or p < 0:
            raise SeriesError("only non-negative integer powers")
        out = PhgSeries.constant(1.0, self.order)
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base
            p >>= 1
        return out.with_meta(self.m, self.codim1)

    def invert(self):
        return invert(self)

    def sqrt(self):
        return sqrt(self)

    def exp(self):
        return exp(self)

    # ----------------------------------------------------------- x-calculus
    def x_dx(self):
        return x_dx(self)

    def d_x(self):
        """Ordinary x-derivative; the result is known to order N-1."""
        N = self.order
        if N < 1:
            raise SeriesError("cannot differentiate an order-0 series")
        if np.any(self._support[0, 1]) and np.any(self._c[0, 1] != 0):
            raise SeriesError("derivative of log x leaves the series class")
        k = np.arange(1, N + 1)[:, None]
        c = np.zeros((N, 2, self._c.shape[2]), dtype=self._c.dtype)
        c[:, 0] = k * self._c[1:, 0] + self._c[1:, 1]
        c[:, 1] = k * self._c[1:, 1]
        sup = np.zeros((N, 2), dtype=bool)
        sup[:, 0] = self._support[1:, 0] | self._support[1:, 1]
        sup[:, 1] = self._support[1:, 1]
        return self._new(c, sup)

    def shift(self, j=1):
        """Multiply by ``x**j`` (``j >= 0``); the order grows by ``j``."""
        if j < 0:
            raise SeriesError("negative shifts are not representable")
        pad = np.zeros((j, 2, self._c.shape[2]), dtype=self._c.dtype)
        c = np.concatenate([pad, self._c], axis=0)
        sup = np.concatenate([np.zeros((j, 2), dtype=bool), self._support], axis=0)
        return self._new(c, sup)

    def unshift(self, j=1):
        """Divide by ``x**j``; the lowest ``j`` orders must vanish."""
        if j == 0:
            return self
        if np.any(self._c[:j] != 0):
            raise SeriesError("series does not vanish to the requested order")
        return self._new(self._c[j:], self._support[j:])

    def truncate(self, order):
        if order > self.order:
            raise SeriesError("truncate cannot raise the order")
        return self._new(self._c[:order + 1], self._support[:order + 1])

    def d_s(self, period=2 * math.pi, method="spectral"):
        return d_s(self, period=period, method=method)

    # ------------------------------------------------------------ structure
    def parity(self, tol=PARITY_TOL):
        return parity(self, tol)

    def to_dict(self):
        if self.is_complex:
            raise SeriesError("complex series cannot be serialized")
        terms = []
        for k, log, c in self.terms():
            terms.append({"k": k, "log": log,
                          "coeff": c.tolist() if self.grid else float(c)})
        return {"order": self.order, "m": self.m, "codim1": self.codim1,
                "terms": terms}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        terms = {(t["k"], bool(t["log"])): t["coeff"] for t in d["terms"]}
        return cls.from_terms(terms, int(d["order"]), m=d.get("m"),
                              codim1=bool(d.get("codim1", False)))

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    def allclose(self, other, atol=1e-12):
        other = self._coerce(other)
        N = min(self.order, other.order)
        return bool(np.all(np.abs(self._c[:N + 1] - other._c[:N + 1]) <= atol))

    def __repr__(self):
        parts = []
        for k, log, c in self.terms():
            val = np.max(np.abs(c)) if self.grid else c
            tag = f"x^{k}" + (" log x" if log else "")
            parts.append(f"{val:.6g}*{tag}" if not self.grid else f"|{val:.3g}|*{tag}")
        body = " + ".join(parts) if parts else "0"
        return f"PhgSeries({body}, N={self.order})"


# ---------------------------------------------------------------- functions
def add(a: PhgSeries, b: PhgSeries) -> PhgSeries:
    return a + b


def mul(a: PhgSeries, b: PhgSeries, log_tol=PARITY_TOL) -> PhgSeries:
    """Cauchy product truncated at ``min(N_a, N_b)`` with log bookkeeping."""
    a._check_grid(b)
    N = min(a.order, b.order)
    A = a._c[:N + 1]
    B = b._c[:N + 1]
    SA = a._support[:N + 1]
    SB = b._support[:N + 1]
    P = max(A.shape[2], B.shape[2])
    c = np.zeros((N + 1, 2, P), dtype=np.result_type(A, B))
    sup = np.zeros((N + 1, 2), dtype=bool)
    log_a = SA[:, 1].any()
    log_b = SB[:, 1].any()
    pairs = [(0, 0)]
    if log_a:
        pairs.append((1, 0))
    if log_b:
        pairs.append((0, 1))
    for k in range(N + 1):
        for ta, tb in pairs:
            mask = SA[:k + 1, ta] & SB[k::-1, tb]
            if mask.any():
                c[k, ta + tb] += np.einsum("ip,ip->p", A[:k + 1, ta], B[k::-1, tb])
                sup[k, ta + tb] = True
    if log_a and log_b:
        scale = max(a.max_abs() * b.max_abs(), 1e-300)
        for k in range(N + 1):
            mask = SA[:k + 1, 1] & SB[k::-1, 1]
            if mask.any():
                v = np.einsum("ip,ip->p", A[:k + 1, 1], B[k::-1, 1])
                if np.max(np.abs(v)) > log_tol * scale:
                    raise LogOverflowError(
                        f"log^2 term at order {k} within truncation order {N}")
    return a._new(c, sup, b)


def _analytic(a: PhgSeries, taylor) -> PhgSeries:
    """Apply ``f`` with Taylor data ``taylor(a0, n)`` around the leading coefficient.

    ``taylor`` returns the list ``[f(a0), f'(a0), f''(a0)/2, ...]`` of length
    ``n + 1`` (entries may be grid arrays).
    """
    if a._support[0, 1] and np.any(a._c[0, 1] != 0):
        raise SeriesError("log term at order 0")
    a0 = a._c[0, 0] if a.grid else a._c[0, 0, 0]
    rest_c = np.array(a._c)
    rest_c[0, 0] = 0
    rest = a._new(rest_c, a._support)
    N = a.order
    coeffs = taylor(a0, N)
    out = PhgSeries(np.zeros_like(a._c, dtype=np.result_type(a._c, *coeffs)),
                    np.zeros_like(a._support), m=a.m, codim1=a.codim1, grid=a.grid)
    power = PhgSeries.constant(1.0, N)
    out = out + power * coeffs[0]
    for j in range(1, N + 1):
        power = mul(power, rest)
        if power.lowest_order() is None:
            break
        out = out + power * coeffs[j]
    return out.with_meta(a.m, a.codim1)


def _check_positive(a0):
    if np.any(np.real(a0) <= 0):
        raise SeriesError("leading coefficient must be strictly positive")


def invert(a: PhgSeries) -> PhgSeries:
    _check_positive(a._c[0, 0])

    def taylor(x0, n):
        return [(-1) ** j / x0 ** (j + 1) for j in range(n + 1)]

    return _analytic(a, taylor)


def sqrt(a: PhgSeries) -> PhgSeries:
    _check_positive(a._c[0, 0])

    def taylor(x0, n):
        root = np.sqrt(x0)
        out, binom = [], 1.0
        for j in range(n + 1):
            out.append(binom * root / x0 ** j)
            binom *= (0.5 - j) / (j + 1)
        return out

    return _analytic(a, taylor)


def exp(a: PhgSeries) -> PhgSeries:
    def taylor(x0, n):
        e = np.exp(x0)
        return [e / math.factorial(j) for j in range(n + 1)]

    return _analytic(a, taylor)


def x_dx(a: PhgSeries) -> PhgSeries:
    """``x d/dx``: x^k -> k x^k, x^k log x -> k x^k log x + x^k."""
    k = np.arange(a.order + 1)[:, None]
    c = np.zeros_like(a._c)
    c[:, 0] = k * a._c[:, 0] + a._c[:, 1]
    c[:, 1] = k * a._c[:, 1]
    sup = np.zeros_like(a._support)
    sup[:, 1] = a._support[:, 1]
    sup[:, 0] = (a._support[:, 0] & (np.arange(a.order + 1) > 0)) | a._support[:, 1]
    return a._new(c, sup)


def inverse_x_dx(a: PhgSeries) -> PhgSeries:
    """Solve ``x dw/dx = a`` with ``w`` free of constant terms."""
    if np.any(a._c[0] != 0):
        raise SeriesError("x d/dx has no preimage for order-0 terms")
    k = np.arange(a.order + 1, dtype=float)[:, None]
    k[0] = 1.0
    c = np.zeros_like(a._c)
    c[:, 1] = a._c[:, 1] / k
    c[:, 0] = (a._c[:, 0] - c[:, 1]) / k
    sup = np.array(a._support)
    sup[:, 0] |= a._support[:, 1]
    return a._new(c, sup)


def _spectral_derivative(values, period):
    P = values.shape[-1]
    freq = np.fft.fftfreq(P, d=period / P) * 2 * np.pi
    if P % 2 == 0:
        freq[P // 2] = 0.0
    return np.fft.ifft(1j * freq * np.fft.fft(values, axis=-1), axis=-1)


def periodic_derivative(values, period=2 * math.pi, method="spectral"):
    """Derivative of samples of a periodic function along the last axis."""
    values = np.asarray(values)
    P = values.shape[-1]
    if method == "spectral":
        if np.iscomplexobj(values):
            # separate parts keep complex-step perturbations free of FFT rounding
            return (_spectral_derivative(values.real, period).real
                    + 1j * _spectral_derivative(values.imag, period).real)
        return _spectral_derivative(values, period).real
    if method == "fd4":
        h = period / P
        return (-np.roll(values, -2, -1) + 8 * np.roll(values, -1, -1)
                - 8 * np.roll(values, 1, -1) + np.roll(values, 2, -1)) / (12 * h)
    raise SeriesError(f"unknown derivative stencil {method!r}")


def d_s(a: PhgSeries, period=2 * math.pi, method="spectral") -> PhgSeries:
    """Tangential derivative of every coefficient (periodic grid)."""
    if not a.grid:
        raise SeriesError("d_s requires grid coefficients")
    c = periodic_derivative(a._c, period, method)
    return a._new(c, a._support)


def coeff(a: PhgSeries, k, log=False):
    return a.coeff(k, log)


def parity(a: PhgSeries, tol=PARITY_TOL):
    """Parity functional: +1 even, -1 odd, 0 negligible, None undefined.

    Coefficients are inspected up to ``x^m`` for even ``m`` (including the
    ``x^m log x`` slot when the series is tagged codimension one) and up to
    ``x^{m+1} log x`` for odd ``m``.  A coefficient counts as zero when its
    magnitude is at most ``tol`` times the largest coefficient of the series.
    """
    if a.m is None:
        raise SeriesError("parity needs the dimension tag m")
    m = a.m
    kmax = m if m % 2 == 0 else m + 1
    kmax = min(kmax, a.order)
    scale = a.max_abs()
    if scale == 0:
        return NEGLIGIBLE
    mags = np.max(np.abs(a._c[:kmax + 1]), axis=2) > tol * scale
    log_allowed = np.zeros(kmax + 1, dtype=bool)
    if m % 2 == 1:
        log_allowed[m + 1:] = True
    elif a.codim1:
        log_allowed[m:] = True
    if np.any(mags[:, 1] & ~log_allowed):
        return UNDEFINED
    present = mags[:, 0] | mags[:, 1]
    ks = np.nonzero(present)[0]
    if ks.size == 0:
        return NEGLIGIBLE
    if np.all(ks % 2 == 0):
        return EVEN
    if np.all(ks % 2 == 1):
        return ODD
    return UNDEFINED


def parity_consistent(a: PhgSeries, target, tol=PARITY_TOL):
    """True when ``parity(a)`` is ``target`` or negligible.

    A series that vanishes through the inspected range is compatible with
    either parity, so ``F = 1`` is read as ``F in {0, 1}`` (same for -1).
    """
    F = parity(a, tol)
    return F == target or F == NEGLIGIBLE


def series_from_function_taylor(coeffs: Iterable[float], order, **meta) -> PhgSeries:
    """Scalar series from a list of plain Taylor coefficients."""
    return PhgSeries.from_terms({(k, False): c for k, c in enumerate(coeffs)},
                                order, **meta)
