"""Resolvent of the minimal (killed at a and b) diffusion.

R0 g(x) = v(x) int_a^x u g dm + u(x) int_x^b v g dm   (Wronskian v D_s u - u D_s v = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .diffusion import ENTRANCE, Grid
from .eigen import EigenSolution, discrete_generator
from .errors import NotInDomain, OutOfDomain, UnboundedIntegrand


@dataclass
class ResolventKernel:
    eig: EigenSolution
    r: float

    def __post_init__(self):
        if not np.isclose(self.r, self.eig.r):
            raise ValueError("kernel r differs from eigenfunction r")

    @property
    def grid(self) -> Grid:
        return self.eig.grid


def make_kernel(eig: EigenSolution) -> ResolventKernel:
    return ResolventKernel(eig, eig.r)


def kernel_at(k: ResolventKernel, x: float, y: float) -> float:
    """R0(x, y) = u(min) v(max), linearly interpolated."""
    spec = k.eig.spec
    for z in (x, y):
        if not spec.a < z < spec.b:
            raise OutOfDomain(f"{z} is not an interior point of ({spec.a}, {spec.b})")
    lo, hi = min(x, y), max(x, y)
    return float(k.eig.u_of(lo) * k.eig.v_of(hi))


def kernel_matrix(k: ResolventKernel):
    """Node-by-node kernel values (symmetric)."""
    u, v = k.eig.u, k.eig.v
    i = np.arange(u.size)
    lo = np.minimum.outer(i, i)
    hi = np.maximum.outer(i, i)
    return u[lo] * v[hi]


def grid_values(grid: Grid, g, bound: Optional[float] = None):
    """Evaluate g (callable of user coordinate, or array on nodes) on the grid."""
    if callable(g):
        vals = np.asarray(g(grid.spec.to_user(grid.x)), dtype=float)
        vals = np.broadcast_to(vals, grid.x.shape).astype(float)
    else:
        vals = np.asarray(g, dtype=float)
        if vals.shape != grid.x.shape:
            raise ValueError("grid function has the wrong length")
    if not np.all(np.isfinite(vals)):
        raise UnboundedIntegrand("g is not finite on the grid")
    if bound is not None and np.max(np.abs(vals)) > bound:
        raise UnboundedIntegrand(f"|g| exceeds the configured bound {bound}",
                                 sup=float(np.max(np.abs(vals))))
    return vals


@dataclass
class MinimalResolvent:
    """R0 g on the grid with its s-derivative and boundary data."""

    kernel: ResolventKernel
    g: np.ndarray
    values: np.ndarray
    ds: np.ndarray
    left: np.ndarray   # int_a^x u g dm
    right: np.ndarray  # int_x^b v g dm

    @property
    def grid(self):
        return self.kernel.grid

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid.x, self.values)

    @property
    def total_u(self):
        return float(self.left[-1])

    @property
    def total_v(self):
        return float(self.right[0])

    def limit(self, endpoint):
        """Boundary limit of R0 g; zero at accessible ends."""
        lim = self.kernel.eig.limits
        if endpoint == "a":
            if self.grid.spec.boundary("a").accessible:
                return 0.0
            return lim["u_at_a"] * self.total_v
        if self.grid.spec.boundary("b").accessible:
            return 0.0
        return lim["v_at_b"] * self.total_u

    def ds_limit(self, endpoint):
        lim = self.kernel.eig.limits
        if endpoint == "a":
            return lim["Dsu_at_a"] * self.total_v
        return lim["Dsv_at_b"] * self.total_u


def _tail_masses(grid: Grid):
    """Speed mass between each grid end and the endpoint, when finite."""
    ma, mb = grid.spec.m_ends
    lo = 0.0 if grid.incl_a or not np.isfinite(ma) else grid.m[0] - ma
    hi = 0.0 if grid.incl_b or not np.isfinite(mb) else mb - grid.m[-1]
    return lo, hi


def apply_minimal(k: ResolventKernel, g, bound: Optional[float] = None) -> MinimalResolvent:
    """x -> int R0(x, y) g(y) dm(y) by trapezoidal quadrature in m."""
    grid = k.grid
    gv = grid_values(grid, g, bound)
    u, v = k.eig.u, k.eig.v
    dM = np.diff(grid.m)
    ug, vg = u * gv, v * gv
    lo_tail, hi_tail = _tail_masses(grid)
    left = np.concatenate([[0.0], np.cumsum(0.5 * (ug[1:] + ug[:-1]) * dM)]) + ug[0] * lo_tail
    right_seg = 0.5 * (vg[1:] + vg[:-1]) * dM
    right = np.concatenate([np.cumsum(right_seg[::-1])[::-1], [0.0]]) + vg[-1] * hi_tail
    vals = v * left + u * right
    ds = k.eig.Dsv * left + k.eig.Dsu * right
    return MinimalResolvent(k, gv, vals, ds, left, right)


def resolvent_of_one(k: ResolventKernel):
    """(1/r)(1 - v/v(a) - u/u(b)) with 1/inf = 0."""
    lim = k.eig.limits
    va, ub = lim["v_at_a"], lim["u_at_b"]
    term_a = 0.0 if np.isinf(va) else k.eig.v / va
    term_b = 0.0 if np.isinf(ub) else k.eig.u / ub
    return (1.0 - term_a - term_b) / k.r


@dataclass
class RLReport:
    direct: np.ndarray
    closed: np.ndarray
    discrepancy: float
    generator_residual: float
    entrance_ds: dict


def rl_formula(k: ResolventKernel, f: Callable, Lf: Callable, f_a: Optional[float] = None,
               f_b: Optional[float] = None, tol: float = 1e-3) -> RLReport:
    """R0(L f) two ways: by quadrature and by
    r R0 f - f + f(a) v/v(a) + f(b) u/u(b)."""
    grid = k.grid
    fv = grid_values(grid, f)
    lfv = grid_values(grid, Lf)
    # (f, Lf) consistency: discrete D_m D_s f against Lf
    disc = discrete_generator(grid, fv)
    scale = max(1.0, float(np.max(np.abs(lfv))))
    gen_resid = float(np.max(np.abs(disc - lfv[1:-1]))) / scale
    if gen_resid > tol:
        raise NotInDomain("supplied L f is not D_m D_s f", residual=gen_resid)
    lim = k.eig.limits
    f_a = float(fv[0]) if f_a is None else f_a
    f_b = float(fv[-1]) if f_b is None else f_b
    direct = apply_minimal(k, lfv).values
    closed = k.r * apply_minimal(k, fv).values - fv
    if np.isfinite(lim["v_at_a"]):
        closed = closed + f_a * k.eig.v / lim["v_at_a"]
    if np.isfinite(lim["u_at_b"]):
        closed = closed + f_b * k.eig.u / lim["u_at_b"]
    ent = {}
    spec = grid.spec
    for end, i in (("a", 0), ("b", -1)):
        if spec.boundary(end).kind == ENTRANCE:
            ent[end] = float(np.diff(fv)[i] / np.diff(grid.s)[i])
    return RLReport(direct, closed, float(np.max(np.abs(direct - closed))), gen_resid, ent)


def generator_residual(mr: MinimalResolvent):
    """sup |D_m D_s R0g - (r R0g - g)| over interior nodes."""
    lf = discrete_generator(mr.grid, mr.values)
    return float(np.max(np.abs(lf - (mr.kernel.r * mr.values - mr.g)[1:-1])))


def boundary_report(mr: MinimalResolvent) -> dict:
    """Boundary behaviour of R0 g: limits at each end and, at entrance ends,
    D_s R0 g against the constant predicted by the eigenfunction tables."""
    spec = mr.grid.spec
    out = {}
    for end in ("a", "b"):
        cls = spec.boundary(end)
        i = 0 if end == "a" else -1
        entry = {"kind": cls.kind, "limit": mr.limit(end), "node_value": float(mr.values[i]),
                 "gamma_times_limit": float(cls.gamma * mr.limit(end))}
        if cls.kind == ENTRANCE:
            tail = mr.values[:3][::-1] if end == "a" else mr.values[-3:]
            d = np.abs(np.diff(tail))
            entry["verifiable"] = bool(d[-1] < d[0])
        out[end] = entry
    return out
