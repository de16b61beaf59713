"""Increasing and decreasing eigenfunctions of L = D_m D_s.

phi and psi solve the Volterra equations

    phi = 1 + r int_c^x ds int_c^y phi dm,      psi = (s(x) - s(c)) + r int_c^x ds int_c^y psi dm,

by Picard iteration with trapezoidal quadrature (first in m, then in s).
The decreasing solution v and increasing solution u are then the
combinations phi - gamma psi selected by the boundary behaviour.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diffusion import ENTRANCE, EXIT, NATURAL, REGULAR, DiffusionSpec, Grid, make_grid
from .errors import DegenerateBracket, NoConvergence, ZeroWronskian


@dataclass
class GridFunction:
    """Values and s-derivatives of a function on grid nodes."""

    grid: Grid
    values: np.ndarray
    ds: np.ndarray
    c_index: Optional[int] = None

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid.x, self.values)


def _cumtrap(weights, f, j):
    """Signed cumulative trapezoid integral of f against increments ``weights``
    (len n-1) starting at node ``j``."""
    seg = 0.5 * (f[1:] + f[:-1]) * weights
    out = np.empty_like(f)
    out[j] = 0.0
    out[j + 1:] = np.cumsum(seg[j:])
    out[:j] = -np.cumsum(seg[:j][::-1])[::-1]
    return out


def _picard(S, M, r, j, f0, d0, tol, max_iter):
    dS, dM = np.diff(S), np.diff(M)
    f = f0.copy()
    for it in range(max_iter):
        inner = _cumtrap(dM, f, j)
        new = f0 + r * _cumtrap(dS, inner, j)
        change = np.max(np.abs(new - f)) / max(np.max(np.abs(new)), 1e-300)
        f = new
        if change < tol:
            inner = _cumtrap(dM, f, j)
            return f, d0 + r * inner, it + 1
    raise NoConvergence(
        f"Picard iteration did not converge in {max_iter} sweeps", r=r, change=float(change))


def _fundamental(S, M, r, j, tol=1e-12, max_iter=200):
    n = S.size
    phi, dphi, _ = _picard(S, M, r, j, np.ones(n), 0.0, tol, max_iter)
    psi, dpsi, _ = _picard(S, M, r, j, S - S[j], 1.0, tol, max_iter)
    return phi, dphi, psi, dpsi


def integral_residual(S, M, r, j, f, f0):
    """Sup-norm residual of f - f0 - r K f for the Volterra operator K."""
    inner = _cumtrap(np.diff(M), f, j)
    return float(np.max(np.abs(f - f0 - r * _cumtrap(np.diff(S), inner, j))))


def solve_phi_psi(spec: DiffusionSpec, r: float, c: Optional[float] = None,
                  grid: Optional[Grid] = None, n: int = 2001, tol: float = 1e-12,
                  max_iter: int = 200):
    """Return ``(phi, psi)`` as :class:`GridFunction` objects.

    ``c`` is snapped to the nearest grid node.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    grid = make_grid(spec, n) if grid is None else grid
    c = spec.c if c is None else c
    if not spec.a < c < spec.b:
        raise ValueError("c must lie strictly inside (a, b)")
    j = grid.locate(c)
    phi, dphi, psi, dpsi = _fundamental(grid.s, grid.m, r, j, tol, max_iter)
    return GridFunction(grid, phi, dphi, j), GridFunction(grid, psi, dpsi, j)


def _far_reference(S, M, r):
    """Node used as reference for the solution decreasing toward the last node:
    the last node still at least one 'e-fold' away from the end."""
    w = r * np.abs(S[-1] - S) * np.abs(M[-1] - M)
    idx = np.nonzero(w >= 1.0)[0]
    return int(idx[-1]) if idx.size else S.size // 2


def gamma_bounds(phi, dphi, psi, dpsi, j):
    """``(lower, upper)``: phi - gamma psi is non-increasing on [c, end) iff
    gamma >= lower, and non-negative there iff gamma <= upper."""
    right = slice(j + 1, None)
    return float(np.max(dphi[right] / dpsi[right])), float(np.min(phi[right] / psi[right]))


def gamma_bar(phi, dphi, psi, dpsi, j, iters=60):
    """Supremum of gamma keeping phi - gamma psi non-negative and
    non-increasing on the grid from c on, by bisection."""
    g_lo, g_hi = gamma_bounds(phi, dphi, psi, dpsi, j)
    if g_lo > g_hi * (1 + 1e-12) + 1e-300:
        raise DegenerateBracket("no gamma keeps phi - gamma psi non-negative and non-increasing",
                                lower=g_lo, upper=g_hi)

    def ok(g):
        return np.all(phi[j:] - g * psi[j:] >= 0) and np.all(dphi[j:] - g * dpsi[j:] <= 0)

    lo, hi = g_lo, g_hi + abs(g_hi) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * abs(lo):
            break
    return lo


def _select_gamma(phi, dphi, psi, dpsi, j, end_kind, end_gap):
    """gamma such that phi - gamma psi is the decreasing solution.

    ``end_gap`` is s(end) - s(last node) for an accessible non-node end,
    0 for a node end.  At an accessible end v(end) = 0.  At an inaccessible end
    the grid stops short of the boundary and the truncated problem uses
    D_s v = 0 at the last node (the lower bound), which is the boundary limit
    of D_s v there; it still fails above the supremum gamma_bar.
    """
    if end_kind in (REGULAR, EXIT):
        # v(end) = 0 extrapolated linearly in s
        return (phi[-1] + dphi[-1] * end_gap) / (psi[-1] + dpsi[-1] * end_gap)
    g_lo, g_hi = gamma_bounds(phi, dphi, psi, dpsi, j)
    if g_lo > g_hi * (1 + 1e-12) + 1e-300:
        raise DegenerateBracket("no gamma keeps phi - gamma psi non-negative and non-increasing",
                                lower=g_lo, upper=g_hi)
    return g_lo


def _decreasing(S, M, r, kind, end_gap, j=None):
    j = _far_reference(S, M, r) if j is None else j
    phi, dphi, psi, dpsi = _fundamental(S, M, r, j)
    g = _select_gamma(phi, dphi, psi, dpsi, j, kind, end_gap)
    v, dv = phi - g * psi, dphi - g * dpsi
    if kind in (REGULAR, EXIT):
        v = np.where(np.abs(v) < 1e-13 * np.max(np.abs(v)), 0.0, v)
    return np.maximum(v, 0.0), np.minimum(dv, 0.0)


def _end_gap(grid: Grid, endpoint):
    if endpoint == "b":
        return 0.0 if grid.incl_b else (grid.ds_b if np.isfinite(grid.ds_b) else 0.0)
    return 0.0 if grid.incl_a else (grid.ds_a if np.isfinite(grid.ds_a) else 0.0)


def build_v(spec: DiffusionSpec, phi: GridFunction, psi: GridFunction, r: float) -> GridFunction:
    """Minimal non-negative non-increasing solution ``phi - gamma psi``."""
    grid = phi.grid
    kind = spec.boundary("b").kind
    g = _select_gamma(phi.values, phi.ds, psi.values, psi.ds, phi.c_index, kind, _end_gap(grid, "b"))
    return GridFunction(grid, phi.values - g * psi.values, phi.ds - g * psi.ds, phi.c_index)


def build_u(spec: DiffusionSpec, phi: GridFunction, psi: GridFunction, r: float) -> GridFunction:
    """Mirror image of :func:`build_v` toward ``a``."""
    grid = phi.grid
    kind = spec.boundary("a").kind
    j = phi.values.size - 1 - phi.c_index
    # reflect: x -> -x turns s into -s(-x); phi is even, psi odd under reflection
    g = _select_gamma(phi.values[::-1], -phi.ds[::-1], -psi.values[::-1], psi.ds[::-1], j,
                      kind, _end_gap(grid, "a"))
    return GridFunction(grid, phi.values + g * psi.values, phi.ds + g * psi.ds, phi.c_index)


# Table of boundary limits: quantity -> (endpoint, property making it finite, fallback)
_LIMIT_TABLE = {
    "v_at_a": ("a", "accessible", np.inf),
    "v_at_b": ("b", "entrance", 0.0),
    "Dsv_at_a": ("a", "enterable", -np.inf),
    "Dsv_at_b": ("b", "accessible", 0.0),
    "u_at_a": ("a", "entrance", 0.0),
    "u_at_b": ("b", "accessible", np.inf),
    "Dsu_at_a": ("a", "accessible", 0.0),
    "Dsu_at_b": ("b", "enterable", np.inf),
}


def _aitken(seq):
    """Limit of the last three terms of a (geometrically) convergent sequence."""
    x0, x1, x2 = seq
    d1, d2 = x1 - x0, x2 - x1
    den = d2 - d1
    if den == 0 or not np.isfinite(den) or d1 == 0 or abs(d2) >= abs(d1):
        return x2
    return x2 - d2 * d2 / den


@dataclass
class EigenSolution:
    spec: DiffusionSpec
    r: float
    grid: Grid
    u: np.ndarray
    v: np.ndarray
    Dsu: np.ndarray
    Dsv: np.ndarray
    limits: dict
    wronskian_residual: float
    raw_wronskian: float = np.nan
    endpoint_identity_residual: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.grid.x

    @property
    def u_at_b(self):
        return self.limits["u_at_b"]

    @property
    def v_at_a(self):
        return self.limits["v_at_a"]

    @property
    def Dsu_at_a(self):
        return self.limits["Dsu_at_a"]

    @property
    def Dsv_at_b(self):
        return self.limits["Dsv_at_b"]

    def u_of(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid.x, self.u)

    def v_of(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid.x, self.v)

    def wronskian(self):
        return self.v * self.Dsu - self.u * self.Dsv

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "v", "Dsu", "Dsv"])
            for row in zip(self.spec.to_user(self.grid.x), self.u, self.v, self.Dsu, self.Dsv):
                w.writerow([f"{val:.12g}" for val in row])


def _limit(vals, endpoint, node_end):
    if node_end:
        return float(vals[0] if endpoint == "a" else vals[-1])
    tail = vals[:3][::-1] if endpoint == "a" else vals[-3:]
    return float(_aitken(tail))


def boundary_limits(spec: DiffusionSpec, grid: Grid, u, v, Dsu, Dsv):
    arrays = {"u": u, "v": v, "Dsu": Dsu, "Dsv": Dsv}
    out = {}
    for key, (end, prop, fallback) in _LIMIT_TABLE.items():
        cls = spec.boundary(end)
        finite = cls.kind == ENTRANCE if prop == "entrance" else getattr(cls, prop)
        if not finite:
            out[key] = fallback
            continue
        node_end = grid.incl_a if end == "a" else grid.incl_b
        vals = arrays[key.split("_at_")[0]]
        if key in ("v_at_a", "u_at_b") and not node_end:
            # accessible non-node end (exit): extrapolate in s along the tail
            gap = grid.ds_a if end == "a" else grid.ds_b
            i = 0 if end == "a" else -1
            d = arrays["Dsv" if key == "v_at_a" else "Dsu"][i]
            lin = vals[i] + (-d if end == "a" else d) * gap
            out[key] = float(lin) if np.isfinite(lin) else _limit(vals, end, False)
            continue
        out[key] = _limit(vals, end, node_end)
    return out


def normalize_wronskian(spec: DiffusionSpec, u: GridFunction, v: GridFunction, r: float) -> EigenSolution:
    """Scale ``u`` so that ``v D_s u - u D_s v = 1``."""
    grid = u.grid
    W = v.values * u.ds - u.values * v.ds
    raw = float(np.median(W))
    if not abs(raw) > 1e-14:
        raise ZeroWronskian("u and v are numerically proportional", raw=raw)
    uu, du = u.values / raw, u.ds / raw
    resid = float(np.max(np.abs(v.values * du - uu * v.ds - 1.0)))
    limits = boundary_limits(spec, grid, uu, v.values, du, v.ds)
    with np.errstate(divide="ignore"):
        check = {
            "a": abs(limits["Dsu_at_a"] - _inv(limits["v_at_a"])),
            "b": abs(limits["Dsv_at_b"] + _inv(limits["u_at_b"])),
        }
    return EigenSolution(spec=spec, r=r, grid=grid, u=uu, v=v.values.copy(), Dsu=du,
                         Dsv=v.ds.copy(), limits=limits, wronskian_residual=resid,
                         raw_wronskian=raw, endpoint_identity_residual=check)


def _inv(x):
    return 0.0 if np.isinf(x) else 1.0 / x


def solve_eigen(spec: DiffusionSpec, r: float, n: int = 2001, grid: Optional[Grid] = None) -> EigenSolution:
    """u_r and v_r on a grid, each computed from a reference point near the
    end toward which it decreases (keeps phi - gamma psi free of cancellation)."""
    if not r > 0:
        raise ValueError("r must be positive")
    grid = make_grid(spec, n) if grid is None else grid
    S, M = grid.s, grid.m
    kb, ka = spec.boundary("b").kind, spec.boundary("a").kind
    v, dv = _decreasing(S, M, r, kb, _end_gap(grid, "b"))
    ur, dur = _decreasing(-S[::-1], -M[::-1], r, ka, _end_gap(grid, "a"))
    u, du = ur[::-1], -dur[::-1]
    return normalize_wronskian(spec, GridFunction(grid, u, du), GridFunction(grid, v, dv), r)


def discrete_generator(grid: Grid, f):
    """Divided differences in s then m at interior nodes (length n-2)."""
    slope = np.diff(f) / np.diff(grid.s)
    half = 0.5 * (grid.m[2:] - grid.m[:-2])
    return np.diff(slope) / half
