"""Scale/speed representation of a one-dimensional diffusion and Feller's
boundary classification.

A diffusion on ``(a, b)`` is given by a strictly increasing scale ``s`` and a
strictly increasing speed function ``m``; the generator is ``D_m D_s``.
Infinite intervals are handled by a compactifying coordinate: the spec always
lives on a finite interval and ``coordinate`` maps internal points back to the
user's coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import (
    DivergentQuadrature,
    IndeterminateDivergence,
    NonMonotone,
    NonPositiveDiffusion,
)

REGULAR, EXIT, ENTRANCE, NATURAL = "Regular", "Exit", "Entrance", "Natural"

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class Tabulated:
    """Piecewise-linear function through ``(xs, ys)``, extended linearly."""

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("tabulated data needs two equal-length columns")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise NonMonotone("tabulated columns must be strictly increasing")
        self.xs, self.ys = xs, ys

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys = self.xs, self.ys
        out = np.interp(x, xs, ys)
        lo, hi = x < xs[0], x > xs[-1]
        out = np.where(lo, ys[0] + (x - xs[0]) * (ys[1] - ys[0]) / (xs[1] - xs[0]), out)
        out = np.where(hi, ys[-1] + (x - xs[-1]) * (ys[-1] - ys[-2]) / (xs[-1] - xs[-2]), out)
        return out


def _limit(fn, end, inward):
    """Value of ``fn`` at an endpoint, as a limit when the raw value is NaN."""
    with np.errstate(all="ignore"):
        v = float(fn(np.array([end]))[0])
        if not np.isnan(v):
            return v
        last = np.nan
        for k in range(4, 16):
            last = float(fn(np.array([end + inward * 10.0 ** (-k)]))[0])
    return last


def _end_value(spec, fn, endpoint):
    """Endpoint value of s or m; infinite when the cutoff ladder diverges,
    whatever a raw evaluation at the endpoint returns."""
    end = spec.a if endpoint == "a" else spec.b
    sign = 1.0 if endpoint == "a" else -1.0
    eps0 = min(0.1 * (spec.b - spec.a), 0.5 * abs(spec.c - end))
    pts = end + sign * eps0 * 2.0 ** -np.arange(spec.ladder + 1)
    with np.errstate(all="ignore"):
        vals = np.abs(np.asarray(fn(pts), dtype=float))
    if np.all(np.isfinite(vals)):
        try:
            if _decide(vals, spec.divergence_tol) == np.inf:
                return -sign * np.inf
        except IndeterminateDivergence:
            pass
    return _limit(fn, end, sign)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """Interval plus scale and speed; both normalised to vanish at ``c``."""

    a: float
    b: float
    scale: Callable
    speed: Callable
    c: Optional[float] = None
    sde: Optional[tuple] = None
    coordinate: Optional[Callable] = None
    name: str = ""
    divergence_tol: float = 1e-3
    ladder: int = 20

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("internal interval must be finite; supply a compactifying coordinate")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.c is None:
            object.__setattr__(self, "c", 0.5 * (self.a + self.b))
        if not self.a < self.c < self.b:
            raise ValueError("reference point c must lie strictly inside (a, b)")

    @cached_property
    def _offsets(self):
        c = np.array([self.c])
        with np.errstate(all="ignore"):
            return float(self.scale(c)[0]), float(self.speed(c)[0])

    def s(self, x):
        with np.errstate(all="ignore"):
            return np.asarray(self.scale(np.asarray(x, dtype=float)), dtype=float) - self._offsets[0]

    def m(self, x):
        with np.errstate(all="ignore"):
            return np.asarray(self.speed(np.asarray(x, dtype=float)), dtype=float) - self._offsets[1]

    @cached_property
    def s_ends(self):
        return (_end_value(self, self.s, "a"), _end_value(self, self.s, "b"))

    @cached_property
    def m_ends(self):
        return (_end_value(self, self.m, "a"), _end_value(self, self.m, "b"))

    def to_user(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.coordinate is None else np.asarray(self.coordinate(x), dtype=float)

    @cached_property
    def classes(self):
        return classify_boundary(self, "a"), classify_boundary(self, "b")

    def boundary(self, endpoint):
        return self.classes[0 if endpoint == "a" else 1]

    def check_monotone(self, x):
        x = np.asarray(x, dtype=float)
        for label, vals in (("scale", self.s(x)), ("speed", self.m(x))):
            if np.any(np.diff(vals) <= 0) or not np.all(np.isfinite(vals)):
                raise NonMonotone(f"{label} is not strictly increasing and finite on the grid")


def spec_from_functions(scale, speed, a, b, c=None, name="", coordinate=None):
    return DiffusionSpec(a=a, b=b, scale=scale, speed=speed, c=c, name=name, coordinate=coordinate)


def spec_from_densities(scale_density, speed_density, a, b, c=None, name="", coordinate=None):
    """Spec whose s and m are integrals of the given densities from ``c``."""
    c = 0.5 * (a + b) if c is None else c
    return DiffusionSpec(
        a=a, b=b,
        scale=_Antiderivative(scale_density, c, a, b),
        speed=_Antiderivative(speed_density, c, a, b),
        c=c, name=name, coordinate=coordinate,
    )


# --------------------------------------------------------------------------
# quadrature helpers


def _cumulative(f, points, c, span):
    """Signed integrals of ``f`` from ``c`` to each of ``points`` (8-point
    Gauss-Legendre on every gap, gaps split to at most ``span/256``)."""
    points = np.asarray(points, dtype=float)
    flat = points.ravel()
    nodes, inv = np.unique(np.concatenate([flat, [c]]), return_inverse=True)
    gaps = np.diff(nodes)
    hmax = span / 256.0
    pieces = np.maximum(1, np.ceil(gaps / hmax)).astype(int)
    seg_lo = np.repeat(nodes[:-1], pieces)
    seg_idx = np.repeat(np.arange(gaps.size), pieces)
    within = np.arange(seg_lo.size) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    width = np.repeat(gaps / pieces, pieces)
    left = seg_lo + within * width
    mid = left + 0.5 * width
    qx = mid[:, None] + 0.5 * width[:, None] * _GL_X[None, :]
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(f(qx.ravel()), dtype=float), (qx.size,)).reshape(qx.shape)
    seg_int = 0.5 * width * (vals @ _GL_W)
    gap_int = np.bincount(seg_idx, weights=seg_int, minlength=gaps.size)
    cum = np.concatenate([[0.0], np.cumsum(gap_int)])
    ic = np.searchsorted(nodes, c)
    rel = cum - cum[ic]
    return rel[inv[:-1]].reshape(points.shape)


class _Antiderivative:
    def __init__(self, density, c, a, b):
        self.density, self.c, self.span = density, c, b - a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _cumulative(self.density, x, self.c, self.span)


class Compactifier:
    """Map from internal ``(0, 1)`` onto an interval with infinite endpoints.

    ``(lo, inf)``: ``x = lo + y/(1-y)``; ``(-inf, hi)``: ``x = hi - (1-y)/y``;
    ``(-inf, inf)``: ``x = (y - 1/2)/(y(1-y))``.
    """

    def __init__(self, lo, hi):
        if np.isfinite(lo) and np.isfinite(hi):
            raise ValueError("both endpoints finite; no compactification needed")
        self.lo, self.hi = lo, hi

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            if np.isfinite(self.lo):
                return self.lo + y / (1.0 - y)
            if np.isfinite(self.hi):
                return self.hi - (1.0 - y) / y
            return (y - 0.5) / (y * (1.0 - y))

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            if np.isfinite(self.lo):
                return 1.0 / (1.0 - y) ** 2
            if np.isfinite(self.hi):
                return 1.0 / y**2
            return (y * y - y + 0.5) / (y * (1.0 - y)) ** 2

    def inverse(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            if np.isfinite(self.lo):
                d = x - self.lo
                y = np.where(np.isposinf(d), 1.0, d / (1.0 + d))
            elif np.isfinite(self.hi):
                y = 1.0 / (1.0 + self.hi - x)
            else:
                # y = 1/(1 + t) with t = hypot(x, 1) - x, written without cancellation
                q = np.hypot(x, 1.0)
                t = np.where(x > 0, 1.0 / (q + x), q - x)
                y = 1.0 / (1.0 + t)
        return float(y) if scalar else y


class _SDEScale:
    """Scale ``int_c^y exp(-int_c^z 2 mu/sigma^2) dz`` in an internal coordinate."""

    def __init__(self, mu, sigma, c, span, phi=None, dphi=None):
        self.mu, self.sigma, self.c, self.span = mu, sigma, c, span
        self.phi = phi if phi is not None else (lambda y: y)
        self.dphi = dphi if dphi is not None else (lambda y: np.ones_like(np.asarray(y, dtype=float)))

    def sigma_at(self, y):
        sig = np.asarray(self.sigma(self.phi(y)), dtype=float)
        if np.any(~(sig > 0)):
            raise NonPositiveDiffusion("diffusion coefficient must be positive on (a, b)")
        return sig

    def drift_ratio(self, y):
        sig = self.sigma_at(y)
        return 2.0 * np.asarray(self.mu(self.phi(y)), dtype=float) / sig**2 * self.dphi(y)

    def x_density(self, y):
        # ds/dx at x = phi(y)
        inner = _cumulative(self.drift_ratio, y, self.c, self.span)
        if np.any(np.isnan(inner)):
            raise DivergentQuadrature("inner drift integral is not finite")
        with np.errstate(over="ignore"):
            return np.exp(-inner)

    def density(self, y):
        return self.x_density(y) * self.dphi(y)

    def __call__(self, y):
        return _cumulative(self.density, y, self.c, self.span)


class _SDESpeed:
    def __init__(self, scale: _SDEScale):
        self.scale = scale

    def density(self, y):
        sc = self.scale
        sig = sc.sigma_at(y)
        with np.errstate(all="ignore"):
            return 2.0 / (sig**2 * sc.x_density(y)) * sc.dphi(y)

    def __call__(self, y):
        return _cumulative(self.density, y, self.scale.c, self.scale.span)


def from_sde(mu, sigma, a, b, c, coordinate=None, name="sde"):
    """Scale and speed of ``dX = mu(X) dt + sigma(X) dW``.

    ``s' = exp(-int_c^x 2 mu / sigma^2)`` and ``dm = 2 / (sigma^2 s') dx``.
    Infinite endpoints are mapped onto ``(0, 1)`` by :class:`Compactifier`
    unless a ``coordinate`` object with the same interface is supplied.
    """
    if not a < c < b:
        raise ValueError("need a < c < b")
    if coordinate is None and not (np.isfinite(a) and np.isfinite(b)):
        coordinate = Compactifier(a, b)
    if coordinate is None:
        probe = np.linspace(a, b, 2001)[1:-1]
        if np.any(~(np.asarray(sigma(probe), dtype=float) > 0)):
            raise NonPositiveDiffusion("diffusion coefficient must be positive on (a, b)")
        sc = _SDEScale(mu, sigma, c, b - a)
        return DiffusionSpec(a=a, b=b, scale=sc, speed=_SDESpeed(sc), c=c,
                             sde=(mu, sigma), name=name)
    ci = float(coordinate.inverse(c))
    probe = np.linspace(0.0, 1.0, 2001)[1:-1]
    sc = _SDEScale(mu, sigma, ci, 1.0, phi=coordinate, dphi=coordinate.derivative)
    sc.sigma_at(probe)
    return DiffusionSpec(a=0.0, b=1.0, scale=sc, speed=_SDESpeed(sc), c=ci,
                         sde=(mu, sigma), coordinate=coordinate, name=name)


# --------------------------------------------------------------------------
# Feller integrals and classification


@dataclass(frozen=True)
class BoundaryClass:
    accessible: bool
    enterable: bool
    kind: str
    gamma: int
    i_access: float = field(default=np.nan, compare=False)
    i_enter: float = field(default=np.nan, compare=False)

    @classmethod
    def from_flags(cls, accessible, enterable, i_access=np.nan, i_enter=np.nan):
        if accessible and enterable:
            kind = REGULAR
        elif accessible:
            kind = EXIT
        elif enterable:
            kind = ENTRANCE
        else:
            kind = NATURAL
        return cls(bool(accessible), bool(enterable), kind, int(accessible), i_access, i_enter)


def _stieltjes(f_vals, g_vals):
    """Trapezoidal Stieltjes sum of f dg along consecutive samples."""
    return 0.5 * (f_vals[1:] + f_vals[:-1]) * np.diff(g_vals)


def _ladder_sum(spec, endpoint, c, outer, inner, eps0, K, per_band=64):
    """Partial integrals int over (end +- eps_k, c] of (inner(c) - inner(x)) d outer(x)."""
    end = spec.a if endpoint == "a" else spec.b
    sign = 1.0 if endpoint == "a" else -1.0
    inner_c = float(inner(np.array([c]))[0])
    values = []
    total = 0.0
    # core piece from end + eps0 to c
    t = np.linspace(end + sign * eps0, c, 4 * per_band + 1)
    with np.errstate(all="ignore"):
        iv = sign * (inner_c - inner(t))
        ov = outer(t)
    total += abs(np.sum(_stieltjes(iv, ov)))
    values.append(total)
    for k in range(K):
        hi, lo = eps0 * 2.0**-k, eps0 * 2.0 ** -(k + 1)
        t = end + sign * np.linspace(lo, hi, per_band + 1)
        with np.errstate(all="ignore"):
            iv = sign * (inner_c - inner(t))
            ov = outer(t)
        total += abs(np.sum(_stieltjes(iv, ov)))
        values.append(total)
    return np.array(values)


def _decide(values, tol):
    if not np.all(np.isfinite(values)):
        if np.any(np.isnan(values)):
            raise IndeterminateDivergence("Feller integral evaluated to NaN")
        return np.inf
    incs = np.diff(values)
    last = values[-1]
    if last == 0 or incs[-1] <= tol * last:
        return float(last)
    tail = incs[-4:]
    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
    if np.all(ratios < 0.75):
        raise IndeterminateDivergence(
            "integral still converging at the end of the cutoff ladder",
            last_increment=float(incs[-1]), value=float(last))
    return np.inf


def feller_integrals(spec: DiffusionSpec, endpoint: str, c: Optional[float] = None):
    """Return ``(I_access, I_enter)`` toward ``endpoint`` ('a' or 'b').

    ``I_access = int ds(x) int dm(y)`` and ``I_enter`` with the roles swapped;
    ``+inf`` marks divergence as judged by the cutoff ladder.
    """
    c = spec.c if c is None else c
    if not spec.a < c < spec.b:
        raise ValueError("c must lie strictly inside (a, b)")
    end = spec.a if endpoint == "a" else spec.b
    eps0 = min(0.1 * (spec.b - spec.a), 0.5 * abs(c - end))
    acc = _ladder_sum(spec, endpoint, c, spec.s, spec.m, eps0, spec.ladder)
    ent = _ladder_sum(spec, endpoint, c, spec.m, spec.s, eps0, spec.ladder)
    return _decide(acc, spec.divergence_tol), _decide(ent, spec.divergence_tol)


def classify_boundary(spec: DiffusionSpec, endpoint: str, c: Optional[float] = None) -> BoundaryClass:
    i_acc, i_ent = feller_integrals(spec, endpoint, c)
    return BoundaryClass.from_flags(np.isfinite(i_acc), np.isfinite(i_ent), i_acc, i_ent)


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes in [a, b] with scale/speed values and cell bookkeeping.

    An endpoint is a node only when it is regular; other endpoints are
    approached by a geometric tail and treated through limits.
    """

    spec: DiffusionSpec
    x: np.ndarray
    s: np.ndarray
    m: np.ndarray
    incl_a: bool
    incl_b: bool
    dual: np.ndarray          # speed mass of each node's dual cell
    ds_a: float               # s(x0) - s(a) for an accessible, non-node a (else nan)
    ds_b: float

    @property
    def n(self):
        return self.x.size

    @property
    def ds(self):
        return np.diff(self.s)

    @property
    def dm(self):
        return np.diff(self.m)

    def locate(self, x):
        """Index of the node nearest to ``x``."""
        return int(np.argmin(np.abs(self.x - x)))


def make_grid(spec: DiffusionSpec, n: int = 2001, tail_ratio: float = 2.0**-0.25,
              floor: float = 1e-12, reach: float = 200.0) -> Grid:
    """Grid with ``n`` uniform nodes plus geometric tails at non-regular ends.

    Tails stop at ``floor`` (relative) or where ``|s - s(c)| |m - m(c)|``
    exceeds ``reach``, beyond which eigenfunctions leave double range.
    """
    if n < 3:
        raise ValueError("grid needs at least 3 nodes")
    ca, cb = spec.classes
    a, b = spec.a, spec.b
    base = np.linspace(a, b, n)
    h = base[1] - base[0]
    incl_a, incl_b = ca.kind == REGULAR, cb.kind == REGULAR
    parts = []
    if not incl_a:
        k = np.arange(1, 400)
        d = h * tail_ratio**k
        d = d[d > floor * (b - a)]
        parts.append(a + d[::-1])
    parts.append(base[(0 if incl_a else 1):(n if incl_b else n - 1)])
    if not incl_b:
        k = np.arange(1, 400)
        d = h * tail_ratio**k
        d = d[d > floor * (b - a)]
        parts.append(b - d)
    x = np.concatenate(parts)
    s, m = spec.s(x), spec.m(x)
    keep = np.isfinite(s) & np.isfinite(m)
    far = np.abs(s) * np.abs(m) > reach
    ic = np.searchsorted(x, spec.c)
    if not incl_a:
        lo_drop = far & (np.arange(x.size) < ic)
        if lo_drop.any():
            keep &= np.arange(x.size) > np.nonzero(lo_drop)[0].max()
    if not incl_b:
        hi_drop = far & (np.arange(x.size) >= ic)
        if hi_drop.any():
            keep &= np.arange(x.size) < np.nonzero(hi_drop)[0].min()
    x, s, m = x[keep], s[keep], m[keep]
    if x.size < 3:
        raise NonMonotone("too few usable grid nodes")
    spec.check_monotone(x)
    # tail mass beyond a non-node end is lumped onto the last node, as the
    # trapezoid rule of the resolvent quadrature does
    ma, mb = spec.m_ends
    mids = 0.5 * (x[1:] + x[:-1])
    edges = np.concatenate([[m[0]], spec.m(mids), [m[-1]]])
    if incl_a:
        edges[0] = spec.m(a)
    elif np.isfinite(ma):
        edges[0] = ma
    if incl_b:
        edges[-1] = spec.m(b)
    elif np.isfinite(mb):
        edges[-1] = mb
    dual = np.diff(edges)
    sa, sb = spec.s_ends
    ds_a = s[0] - sa if (ca.accessible and not incl_a) else np.nan
    ds_b = sb - s[-1] if (cb.accessible and not incl_b) else np.nan
    return Grid(spec=spec, x=x, s=s, m=m, incl_a=incl_a, incl_b=incl_b, dual=dual,
                ds_a=float(ds_a), ds_b=float(ds_b))
