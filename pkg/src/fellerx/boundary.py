"""Feller boundary data, the boundary functionals Phi_a / Phi_b, and the
resolvent of the extended process.

Conventions
-----------
* ``p4`` lives on ``(a, b]`` and ``q4`` on ``[a, b)``.  An atom of ``p4`` at
  ``b`` is evaluated with the point value of the function at ``b``; for the
  normalised eigenfunctions and R0 g that point value is 0 (they belong to the
  process stopped at ``b``).  With this reading the boundary condition at an
  accessible ``a`` is always ``Phi_a(f) = 0``.
* The resolvent is assembled as ``F0 + sum_e z_e E_e`` over endpoints ``e`` in
  the state space: ``F0 = R0 g`` and ``E_a = v/v(a)``, ``E_b = u/u(b)`` for
  accessible ends, the indicator of ``{e}`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .diffusion import ENTRANCE, EXIT, NATURAL, REGULAR, DiffusionSpec, Grid, _GL_W, _GL_X
from .eigen import EigenSolution, _aitken, discrete_generator
from .errors import (
    CaseMismatch,
    InaccessibleBoundary,
    InvalidBoundaryData,
    MissingEndpointData,
    SingularSystem,
)
from .minimal import ResolventKernel, apply_minimal, grid_values, make_kernel


@dataclass(frozen=True)
class JumpMeasure:
    """Finite atoms plus an optional density (w.r.t. the internal coordinate).

    ``truncated_infinite`` declares that the true measure has infinite mass near
    its own endpoint and that ``lo`` of ``support`` is a truncation point.
    """

    atoms: tuple = ()
    density: Optional[Callable] = None
    support: Optional[tuple] = None
    truncated_infinite: bool = False

    @property
    def empty(self):
        return not self.atoms and self.density is None

    def atom_at(self, x, tol=1e-14):
        return float(sum(w for (y, w) in self.atoms if abs(y - x) <= tol))

    def density_mass(self, n=4096):
        if self.density is None:
            return 0.0
        lo, hi = self.support
        t = np.linspace(lo, hi, n + 1)
        mid = 0.5 * (t[1:] + t[:-1])
        h = t[1] - t[0]
        q = mid[:, None] + 0.5 * h * _GL_X[None, :]
        vals = np.asarray(self.density(q.ravel()), dtype=float).reshape(q.shape)
        return float(np.sum(0.5 * h * (vals @ _GL_W)))

    def total(self):
        return float(sum(w for _, w in self.atoms)) + self.density_mass()


@dataclass(frozen=True)
class FellerBoundaryData:
    """``(p1, p2, p3, p4)`` at ``a`` and ``(q1, q2, q3, q4)`` at ``b``.

    ``include_a``/``include_b`` put an inaccessible endpoint into the state
    space (accessible endpoints are always included).  ``a_regular_for_itself``
    /``b_regular_for_itself`` matter only for an included entrance endpoint;
    ``None`` means "infer from the stagnancy rate".
    """

    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0
    p4: JumpMeasure = field(default_factory=JumpMeasure)
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0
    q4: JumpMeasure = field(default_factory=JumpMeasure)
    include_a: Optional[bool] = None
    include_b: Optional[bool] = None
    a_regular_for_itself: Optional[bool] = None
    b_regular_for_itself: Optional[bool] = None
    case_tag: Optional[str] = None

    def side(self, end):
        if end == "a":
            return self.p1, self.p2, self.p3, self.p4
        return self.q1, self.q2, self.q3, self.q4

    def included(self, spec: DiffusionSpec, end):
        cls = spec.boundary(end)
        flag = self.include_a if end == "a" else self.include_b
        return bool(cls.accessible or flag)

    def regular_for_itself(self, spec: DiffusionSpec, end):
        """Whether an included inaccessible endpoint holds the path (True) or
        is left instantly (False, entrance only)."""
        flag = self.a_regular_for_itself if end == "a" else self.b_regular_for_itself
        if flag is not None:
            return bool(flag)
        cls = spec.boundary(end)
        if cls.kind != ENTRANCE:
            return True
        return self.side(end)[2] > 0


def case_of(data: FellerBoundaryData, spec: DiffusionSpec):
    """Return ``(tag, mirrored)`` with tag in {'1', '2', '3', '4'}."""
    acc_a, acc_b = spec.boundary("a").accessible, spec.boundary("b").accessible
    in_a, in_b = data.included(spec, "a"), data.included(spec, "b")
    if acc_a and acc_b:
        return "4", False
    if acc_a:
        return ("2" if in_b else "1"), False
    if acc_b:
        return ("2" if in_a else "1"), True
    return "3", False


# --------------------------------------------------------------------------
# functions the boundary functionals act on


@dataclass
class BoundaryFunction:
    """Node values plus the endpoint data the functionals need.

    ``at_a``/``at_b`` are point values (which may differ from the interior
    limit), ``ds_*`` s-derivatives and ``lf_*`` values of L f at the ends.
    """

    grid: Grid
    values: np.ndarray
    at_a: float = np.nan
    at_b: float = np.nan
    ds_a: float = np.nan
    ds_b: float = np.nan
    lf_a: float = np.nan
    lf_b: float = np.nan
    lf: Optional[np.ndarray] = None

    def point(self, end):
        return self.at_a if end == "a" else self.at_b

    def ds(self, end):
        return self.ds_a if end == "a" else self.ds_b

    def lf_at(self, end):
        return self.lf_a if end == "a" else self.lf_b

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid.x, self.values)
        spec = self.grid.spec
        out = np.where(x == spec.a, self.at_a, out) if np.isfinite(self.at_a) else out
        out = np.where(x == spec.b, self.at_b, out) if np.isfinite(self.at_b) else out
        return out

    def __add__(self, other):
        return BoundaryFunction(self.grid, self.values + other.values,
                                *(_nan_add(getattr(self, k), getattr(other, k))
                                  for k in ("at_a", "at_b", "ds_a", "ds_b", "lf_a", "lf_b")),
                                lf=None if self.lf is None or other.lf is None else self.lf + other.lf)

    def scaled(self, c):
        return BoundaryFunction(self.grid, c * self.values,
                                *(_nan_mul(getattr(self, k), c)
                                  for k in ("at_a", "at_b", "ds_a", "ds_b", "lf_a", "lf_b")),
                                lf=None if self.lf is None else c * self.lf)


def _nan_add(x, y):
    if np.isnan(x) or np.isnan(y):
        return x if np.isnan(y) else (y if np.isnan(x) else x + y)
    return x + y


def _nan_mul(x, c):
    if c == 0 and np.isinf(x):
        return 0.0
    return x * c


def from_functions(grid: Grid, f: Callable, Lf: Optional[Callable] = None,
                   Dsf: Optional[Callable] = None, at_a=None, at_b=None) -> BoundaryFunction:
    """Tabulate user functions (in user coordinates) for the functionals.

    Endpoint values are taken from the functions at finite endpoints; s
    derivatives default to one-sided divided differences at node ends.
    """
    spec = grid.spec
    vals = grid_values(grid, f)
    lf = grid_values(grid, Lf) if Lf is not None else None
    ends = {}
    for end, idx, node in (("a", 0, grid.incl_a), ("b", -1, grid.incl_b)):
        xe = spec.to_user(np.array([spec.a if end == "a" else spec.b]))
        given = at_a if end == "a" else at_b
        with np.errstate(all="ignore"):
            pv = float(given) if given is not None else (float(np.asarray(f(xe)).ravel()[0]) if np.isfinite(xe[0]) else np.nan)
            lv = float(np.asarray(Lf(xe)).ravel()[0]) if (Lf is not None and np.isfinite(xe[0])) else np.nan
        if Dsf is not None and np.isfinite(xe[0]):
            dv = float(np.asarray(Dsf(xe)).ravel()[0])
        elif node:
            dv = _one_sided(grid, vals, end)
        else:
            dv = np.nan
        ends[end] = (pv, dv, lv)
    return BoundaryFunction(grid, vals, ends["a"][0], ends["b"][0], ends["a"][1], ends["b"][1],
                            ends["a"][2], ends["b"][2], lf=lf)


def _one_sided(grid: Grid, vals, end):
    """Second-order one-sided s-derivative at an end node."""
    if end == "a":
        s, f = grid.s[:3], vals[:3]
    else:
        s, f = grid.s[-3:][::-1], vals[-3:][::-1]
    h1, h2 = s[1] - s[0], s[2] - s[0]
    return float(((f[1] - f[0]) * h2 * h2 - (f[2] - f[0]) * h1 * h1) / (h1 * h2 * (h2 - h1)))


# --------------------------------------------------------------------------
# the functionals


_LUMP_CACHE: dict = {}


def lumped_weights(grid: Grid, mu: JumpMeasure, end: str):
    """Node masses of ``mu`` (hat-function lumping) and the mass of an atom at
    the opposite endpoint when that endpoint is not a grid node."""
    key = (id(grid), id(mu), end)
    hit = _LUMP_CACHE.get(key)
    if hit is not None and hit[0] is grid and hit[1] is mu:
        return hit[2]
    x = grid.x
    spec = grid.spec
    far = spec.b if end == "a" else spec.a
    far_is_node = (grid.incl_b if end == "a" else grid.incl_a)
    w = np.zeros(x.size)
    w_far = 0.0
    for (y, mass) in mu.atoms:
        if abs(y - far) <= 1e-14 and not far_is_node:
            w_far += mass
            continue
        if y <= x[0]:
            w[0] += mass
        elif y >= x[-1]:
            w[-1] += mass
        else:
            i = int(np.searchsorted(x, y)) - 1
            t = (y - x[i]) / (x[i + 1] - x[i])
            w[i] += mass * (1 - t)
            w[i + 1] += mass * t
    if mu.density is not None:
        lo, hi = mu.support
        xl, xr = x[:-1], x[1:]
        cl, cr = np.maximum(xl, lo), np.minimum(xr, hi)
        ok = cr > cl
        cl, cr, il = cl[ok], cr[ok], np.nonzero(ok)[0]
        mid, half = 0.5 * (cl + cr), 0.5 * (cr - cl)
        q = mid[:, None] + half[:, None] * _GL_X[None, :]
        with np.errstate(all="ignore"):
            rho = np.asarray(mu.density(q.ravel()), dtype=float).reshape(q.shape)
        hcell = (x[il + 1] - x[il])[:, None]
        t = (q - x[il][:, None]) / hcell
        wl = half * ((rho * (1 - t)) @ _GL_W)
        wr = half * ((rho * t) @ _GL_W)
        np.add.at(w, il, wl)
        np.add.at(w, il + 1, wr)
        # mass outside the node range goes to the end nodes
        if lo < x[0]:
            w[0] += JumpMeasure(density=mu.density, support=(lo, min(x[0], hi))).density_mass(256)
        if hi > x[-1]:
            w[-1] += JumpMeasure(density=mu.density, support=(max(lo, x[-1]), hi)).density_mass(256)
    out = (w, w_far)
    _LUMP_CACHE[key] = (grid, mu, out)
    if len(_LUMP_CACHE) > 256:
        _LUMP_CACHE.pop(next(iter(_LUMP_CACHE)))
    return out


def _phi(data: FellerBoundaryData, f: BoundaryFunction, end: str, reflect: Optional[float] = None):
    k1, k2, k3, mu = data.side(end)
    if reflect is not None:
        k2 = reflect
    sign = -1.0 if end == "a" else 1.0
    fe = f.point(end)
    if np.isnan(fe):
        raise MissingEndpointData(f"f({end}) is required")
    total = k1 * fe
    if k2 != 0:
        d = f.ds(end)
        if np.isnan(d):
            raise MissingEndpointData(f"D_s f({end}) is required")
        total += sign * k2 * d
    if k3 != 0:
        lv = f.lf_at(end)
        if np.isnan(lv):
            raise MissingEndpointData(f"L f({end}) is required")
        total += k3 * lv
    if not mu.empty:
        w, w_far = lumped_weights(f.grid, mu, end)
        total -= float(np.dot(w, f.values - fe))
        if w_far:
            far = f.point("b" if end == "a" else "a")
            if np.isnan(far):
                raise MissingEndpointData("value at the jump target endpoint is required")
            total -= w_far * (far - fe)
    return float(total)


def phi_a(data: FellerBoundaryData, spec: DiffusionSpec, f: BoundaryFunction) -> float:
    """p1 f(a) - p2 D_s f(a) + p3 L f(a) - int (f - f(a)) dp4."""
    return _phi(data, f, "a")


def phi_b(data: FellerBoundaryData, spec: DiffusionSpec, f: BoundaryFunction) -> float:
    """q1 f(b) + q2 D_s f(b) + q3 L f(b) - int (f - f(b)) dq4."""
    return _phi(data, f, "b")


# --------------------------------------------------------------------------
# building blocks of the extended resolvent


def _in_state(data, spec, end):
    return data.included(spec, end)


def eigen_components(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution):
    """E_a and E_b as BoundaryFunctions (None for endpoints outside I)."""
    grid, r, lim = eig.grid, eig.r, eig.limits
    n = grid.n
    in_a, in_b = _in_state(data, spec, "a"), _in_state(data, spec, "b")
    comps = {}
    if in_a:
        if spec.boundary("a").accessible:
            va = lim["v_at_a"]
            comps["a"] = BoundaryFunction(
                grid, eig.v / va, at_a=1.0, at_b=0.0 if in_b else np.nan,
                ds_a=lim["Dsv_at_a"] / va, ds_b=lim["Dsv_at_b"] / va,
                lf_a=r, lf_b=0.0, lf=r * eig.v / va)
        else:
            comps["a"] = BoundaryFunction(grid, np.zeros(n), at_a=1.0, at_b=0.0 if in_b else np.nan,
                                          ds_a=0.0, ds_b=0.0, lf_a=r, lf_b=0.0, lf=np.zeros(n))
    if in_b:
        if spec.boundary("b").accessible:
            ub = lim["u_at_b"]
            comps["b"] = BoundaryFunction(
                grid, eig.u / ub, at_a=0.0 if in_a else np.nan, at_b=1.0,
                ds_a=lim["Dsu_at_a"] / ub, ds_b=lim["Dsu_at_b"] / ub,
                lf_a=0.0, lf_b=r, lf=r * eig.u / ub)
        else:
            comps["b"] = BoundaryFunction(grid, np.zeros(n), at_a=0.0 if in_a else np.nan, at_b=1.0,
                                          ds_a=0.0, ds_b=0.0, lf_a=0.0, lf_b=r, lf=np.zeros(n))
    return comps


def _endpoint_g(spec: DiffusionSpec, grid: Grid, g, gv, end, given):
    if given is not None:
        return float(given)
    if callable(g):
        xe = spec.to_user(np.array([spec.a if end == "a" else spec.b]))
        with np.errstate(all="ignore"):
            val = float(np.asarray(g(xe), dtype=float).ravel()[0])
        if np.isfinite(val):
            return val
    return float(gv[0] if end == "a" else gv[-1])


def minimal_component(data, spec, kernel: ResolventKernel, g, g_a=None, g_b=None):
    """F0 = R0 g as a BoundaryFunction together with g's endpoint values."""
    mr = apply_minimal(kernel, g)
    grid = kernel.grid
    ga = _endpoint_g(spec, grid, g, mr.g, "a", g_a)
    gb = _endpoint_g(spec, grid, g, mr.g, "b", g_b)
    in_a, in_b = _in_state(data, spec, "a"), _in_state(data, spec, "b")
    f0 = BoundaryFunction(grid, mr.values, at_a=0.0 if in_a else np.nan, at_b=0.0 if in_b else np.nan,
                          ds_a=mr.ds_limit("a"), ds_b=mr.ds_limit("b"),
                          lf_a=-ga, lf_b=-gb, lf=kernel.r * mr.values - mr.g)
    return f0, mr, ga, gb


def _require_accessible(spec, end):
    if not spec.boundary(end).accessible:
        raise InaccessibleBoundary(f"endpoint {end} is not accessible")


def psi_ab(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution) -> float:
    """Phi_a(v)/v(a), the Laplace exponent of the inverse local time at a."""
    _require_accessible(spec, "a")
    return phi_a(data, spec, eigen_components(data, spec, eig)["a"])


def psi_ba(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution) -> float:
    _require_accessible(spec, "b")
    return phi_b(data, spec, eigen_components(data, spec, eig)["b"])


def hitting_transform(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution) -> float:
    """-Phi_a(u)/u(b); for an inaccessible b in the state space this is the
    p4 atom at b, and 0 when b is outside the state space."""
    _require_accessible(spec, "a")
    comps = eigen_components(data, spec, eig)
    if "b" not in comps:
        return 0.0
    return -phi_a(data, spec, comps["b"])


def n_functional(data: FellerBoundaryData, spec: DiffusionSpec, k: ResolventKernel, g,
                 g_a=None) -> float:
    """-Phi_a(R0 g)."""
    _require_accessible(spec, "a")
    f0, *_ = minimal_component(data, spec, k, g, g_a=g_a)
    return -phi_a(data, spec, f0)


def matrix_A(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution, tol=1e-12):
    """[[Phi_a(v)/v(a), Phi_a(u)/u(b)], [Phi_b(v)/v(a), Phi_b(u)/u(b)]]."""
    for end in "ab":
        _require_accessible(spec, end)
    comps = eigen_components(data, spec, eig)
    A = np.array([[phi_a(data, spec, comps["a"]), phi_a(data, spec, comps["b"])],
                  [phi_b(data, spec, comps["a"]), phi_b(data, spec, comps["b"])]])
    det = float(np.linalg.det(A))
    if not det > tol:
        raise SingularSystem("det A is not positive", det=det)
    return A


# --------------------------------------------------------------------------
# extended resolvent


@dataclass
class ExtendedResolvent:
    """R_r g on the grid plus the point values at included endpoints."""

    data: FellerBoundaryData
    spec: DiffusionSpec
    eig: EigenSolution
    case: str
    mirrored: bool
    function: BoundaryFunction
    g: np.ndarray
    g_a: float
    g_b: float
    z: dict
    system: np.ndarray
    rhs: np.ndarray
    row_kinds: dict
    psi: float = np.nan
    n_value: float = np.nan
    hitting: float = np.nan
    det_A: float = np.nan
    boundary_residuals: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.eig.r

    @property
    def x(self):
        return self.eig.grid.x

    @property
    def values(self):
        return self.function.values

    def at(self, end):
        return self.z.get(end, np.nan)

    def __call__(self, x):
        return self.function(x)

    def sidecar(self) -> dict:
        out = {"case": self.case, "mirrored": self.mirrored, "r": self.r,
               "R_at_a": self.at("a"), "R_at_b": self.at("b"),
               "row_kinds": self.row_kinds, "residuals": self.boundary_residuals}
        for key in ("psi", "n_value", "hitting", "det_A"):
            val = getattr(self, key)
            if np.isfinite(val):
                out[key] = val
        return out


def _row_kind(data, spec, end):
    cls = spec.boundary(end)
    if cls.accessible:
        return "phi"
    if not data.regular_for_itself(spec, end):
        return "continuity"
    return "holding"


def _limit_of(comp_name, f: BoundaryFunction, eig: EigenSolution, spec, end, mr=None):
    """Interior limit at an (inaccessible) endpoint of a component."""
    lim = eig.limits
    if comp_name == "F0":
        return mr.limit(end)
    if comp_name == end:
        return 0.0  # indicator of {end}
    other_acc = spec.boundary(comp_name).accessible
    if not other_acc:
        return 0.0
    if comp_name == "a":   # v/v(a) toward b
        return lim["v_at_b"] / lim["v_at_a"]
    return lim["u_at_a"] / lim["u_at_b"]


def extended_resolvent(data: FellerBoundaryData, spec: DiffusionSpec, eig: EigenSolution, g,
                       case_tag: Optional[str] = None, g_a=None, g_b=None,
                       tol=1e-12) -> ExtendedResolvent:
    """R_r g = R0 g + sum_e R_r g(e) E_e with the boundary rows

    * accessible e: Phi_e(R_r g) = 0 (L R_r g(e) = r R_r g(e) - g(e));
    * included inaccessible e holding the path: Phi_e(R_r g) = 0 with no
      reflection term;
    * included entrance e left instantly: R_r g(e) = R_r g(e-).
    """
    tag, mirrored = case_of(data, spec)
    declared = case_tag if case_tag is not None else data.case_tag
    if declared is not None and str(declared).strip("°") != tag:
        raise CaseMismatch(f"declared case {declared} but boundary classes give case {tag}",
                           declared=str(declared), derived=tag)
    kernel = make_kernel(eig)
    f0, mr, ga, gb = minimal_component(data, spec, kernel, g, g_a, g_b)
    comps = eigen_components(data, spec, eig)
    ends = list(comps)
    kinds = {e: _row_kind(data, spec, e) for e in ends}
    M = np.zeros((len(ends), len(ends)))
    rhs = np.zeros(len(ends))
    for i, e in enumerate(ends):
        if kinds[e] == "continuity":
            for j, c in enumerate(ends):
                M[i, j] = (1.0 if c == e else 0.0) - _limit_of(c, comps[c], eig, spec, e)
            rhs[i] = _limit_of("F0", f0, eig, spec, e, mr)
        else:
            refl = None if kinds[e] == "phi" else 0.0
            for j, c in enumerate(ends):
                M[i, j] = _phi(data, comps[c], e, refl)
            rhs[i] = -_phi(data, f0, e, refl)
    z = {}
    if ends:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1.0 / tol or abs(np.linalg.det(M)) <= tol:
            raise SingularSystem("boundary system is singular", det=float(np.linalg.det(M)))
        sol = np.linalg.solve(M, rhs)
        z = {e: float(v) for e, v in zip(ends, sol)}
    F = f0
    for e in ends:
        F = F + comps[e].scaled(z[e])
    # endpoint L F from the resolvent identity
    if "a" in z:
        F.lf_a = eig.r * z["a"] - ga
    if "b" in z:
        F.lf_b = eig.r * z["b"] - gb
    out = ExtendedResolvent(data, spec, eig, tag, mirrored, F, mr.g, ga, gb, z, M, rhs, kinds)
    # reported pieces of the excursion identity at an accessible a (or mirrored b)
    src = "b" if mirrored else "a"
    if spec.boundary(src).accessible:
        other = "a" if src == "b" else "b"
        out.psi = _phi(data, comps[src], src)
        out.n_value = -_phi(data, f0, src)
        out.hitting = -_phi(data, comps[other], src) if other in comps else 0.0
    if tag == "4":
        out.det_A = float(np.linalg.det(M))
    out.boundary_residuals = {e: (float(_phi(data, F, e, None if kinds[e] == "phi" else 0.0))
                                  if kinds[e] != "continuity"
                                  else float(z[e] - _interior_limit(F, eig, spec, e, mr, z)))
                              for e in ends}
    return out


def _interior_limit(F, eig, spec, end, mr, z):
    total = mr.limit(end)
    for c, val in z.items():
        total += val * _limit_of(c, None, eig, spec, end)
    return total


# --------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    value: float = np.nan
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed,
                "value": None if not np.isfinite(self.value) else self.value, "detail": self.detail}


def _p4_integral(spec: DiffusionSpec, mu: JumpMeasure, end: str, weight: Callable):
    """int weight(x) mu(dx) over the represented (possibly truncated) measure."""
    total = 0.0
    for (y, w) in mu.atoms:
        total += w * float(weight(np.array([y]))[0])
    if mu.density is not None:
        lo, hi = mu.support
        t = np.linspace(lo, hi, 4097)
        mid, h = 0.5 * (t[1:] + t[:-1]), t[1] - t[0]
        q = mid[:, None] + 0.5 * h * _GL_X[None, :]
        with np.errstate(all="ignore"):
            vals = (np.asarray(mu.density(q.ravel()), dtype=float) * weight(q.ravel())).reshape(q.shape)
        total += float(np.sum(0.5 * h * (vals @ _GL_W)))
    return total


def validate(data: FellerBoundaryData, spec: DiffusionSpec, raise_on_fail: bool = True):
    """Check the admissibility conditions; returns a list of :class:`Check`."""
    checks = []
    names = {"a": ("p", "pcond"), "b": ("q", "qcond")}
    for end in ("a", "b"):
        letter, cond = names[end]
        k1, k2, k3, mu = data.side(end)
        cls = spec.boundary(end)
        lo_end = spec.a if end == "a" else spec.b
        far = spec.b if end == "a" else spec.a
        nonneg = min(k1, k2, k3, *(w for _, w in mu.atoms)) >= 0 if mu.atoms else min(k1, k2, k3) >= 0
        if mu.density is not None:
            lo, hi = mu.support
            probe = np.linspace(lo, hi, 257)
            nonneg = nonneg and bool(np.all(np.asarray(mu.density(probe)) >= 0))
        checks.append(Check(f"{letter}_nonnegative", bool(nonneg)))
        inside = all((spec.a < y < spec.b) or (abs(y - far) <= 1e-14) for y, _ in mu.atoms)
        if mu.density is not None:
            lo, hi = mu.support
            inside = inside and spec.a <= lo < hi <= spec.b
        checks.append(Check(f"{letter}4_support", bool(inside),
                            detail=f"{letter}4 must live on the interval minus the endpoint {end}"))
        in_state = data.included(spec, end)
        far_end = "b" if end == "a" else "a"
        if mu.atom_at(far) > 0:
            checks.append(Check(f"{letter}4_atom_target", data.included(spec, far_end),
                                detail=f"an atom at {far_end} needs {far_end} in the state space"))
        if not in_state:
            idle = k1 == k2 == k3 == 0 and mu.empty
            checks.append(Check(f"{letter}_unused", bool(idle), detail=f"{end} is outside the state space"))
            continue
        if cls.accessible:
            if cls.kind == REGULAR:
                weight = lambda x, e=lo_end: np.abs(spec.s(x) - spec.s_ends[0 if e == spec.a else 1])
            else:
                weight = _exit_weight(spec, end)
            near = _near_part(mu, spec, end)
            val = _p4_integral(spec, near, end, weight)
            checks.append(Check(f"{cond}1", bool(np.isfinite(val)), val,
                                "int p4(dx) s(a,x)" if cls.kind == REGULAR else "int p4(dx) int_a^x m(y,c) ds(y)"))
            ok2 = (k2 + k3 > 0) or mu.truncated_infinite
            checks.append(Check(f"{cond}2", bool(ok2), k2 + k3,
                                f"{letter}2 + {letter}3 > 0 or {letter}4 infinite near {end}"))
            if cls.kind == EXIT:
                checks.append(Check(f"{letter}2_exit", k2 == 0, k2, f"{letter}2 must vanish at an exit endpoint"))
        else:
            total = mu.total()
            checks.append(Check(f"{letter}4_finite", bool(np.isfinite(total)) and not mu.truncated_infinite,
                                total, f"{letter}4 must be finite at an inaccessible endpoint"))
            checks.append(Check(f"{letter}2_inaccessible", k2 == 0, k2,
                                f"{letter}2 has no meaning at an inaccessible endpoint"))
            holds = data.regular_for_itself(spec, end)
            if cls.kind == NATURAL:
                checks.append(Check(f"{letter}3_positive", k3 > 0, k3,
                                    f"an included natural endpoint needs {letter}3 > 0"))
            elif holds:
                checks.append(Check(f"{letter}3_positive", k3 > 0, k3,
                                    f"a regular-for-itself entrance endpoint needs {letter}3 > 0"))
            else:
                idle = k1 == 0 and k3 == 0 and mu.empty
                checks.append(Check(f"{end}_irregular_consistent", bool(idle),
                                    detail=f"an irregular-for-itself entrance carries no {letter}-data"))
    if data.case_tag is not None:
        tag, _ = case_of(data, spec)
        checks.append(Check("case_tag", str(data.case_tag).strip("°") == tag, detail=f"derived case {tag}"))
    failed = [c for c in checks if not c.passed]
    if failed and raise_on_fail:
        raise InvalidBoundaryData("boundary data failed: " + ", ".join(c.name for c in failed),
                                  failed=[c.name for c in failed],
                                  report=[c.to_dict() for c in checks])
    return checks


def _near_part(mu: JumpMeasure, spec: DiffusionSpec, end):
    """Restriction of ``mu`` to the half of the interval next to ``end``."""
    c = spec.c
    keep = (lambda y: y <= c) if end == "a" else (lambda y: y >= c)
    support = None
    if mu.density is not None:
        lo, hi = mu.support
        lo, hi = (lo, min(hi, c)) if end == "a" else (max(lo, c), hi)
        support = (lo, hi) if hi > lo else None
    return JumpMeasure(atoms=tuple((y, w) for y, w in mu.atoms if keep(y)),
                       density=mu.density if support else None, support=support)


def _exit_weight(spec: DiffusionSpec, end):
    """x -> |int_end^x (m(y) - m(c)) ds(y)| (finite near an exit endpoint)."""
    e = spec.a if end == "a" else spec.b

    def weight(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for i, xi in enumerate(x.ravel()):
            t = np.concatenate([[e + (xi - e) * 1e-14], e + (xi - e) * np.geomspace(1e-14, 1, 400)])
            mv, sv = np.abs(spec.m(t)), spec.s(t)
            out.ravel()[i] = abs(np.sum(0.5 * (mv[1:] + mv[:-1]) * np.diff(sv)))
        return out

    return weight


# --------------------------------------------------------------------------
# domain membership


def generator_domain_check(data: FellerBoundaryData, spec: DiffusionSpec, f: BoundaryFunction,
                           tol: float = 1e-5, scale: float = 1.0) -> dict:
    """Report the membership conditions for ``f`` (with ``f.lf`` = L f)."""
    grid = f.grid
    items = []

    def add(name, resid, limit=tol * scale):
        items.append({"name": name, "residual": float(resid),
                      "passed": bool(np.isfinite(resid) and abs(resid) <= limit)})

    for end in ("a", "b"):
        if not data.included(spec, end):
            continue
        cls = spec.boundary(end)
        kind = _row_kind(data, spec, end)
        if kind != "continuity":
            refl = None if kind == "phi" else 0.0
            add(f"Phi_{end}", _phi(data, f, end, refl))
        if not cls.accessible:
            tail = f.values[:3][::-1] if end == "a" else f.values[-3:]
            add(f"continuity_{end}", f.point(end) - _aitken(tail))
        elif grid.incl_a if end == "a" else grid.incl_b:
            add(f"continuity_{end}", f.point(end) - f.values[0 if end == "a" else -1])
    if f.lf is not None:
        disc = discrete_generator(grid, f.values)
        # rows whose divided differences are dominated by rounding in f
        ds = np.diff(grid.s)
        noise = 8 * np.finfo(float).eps * np.max(np.abs(f.values)) / (
            np.minimum(ds[1:], ds[:-1]) * 0.5 * (grid.m[2:] - grid.m[:-2]))
        # the three-point difference is only first order across a jump in cell size
        hx = np.diff(grid.x)
        smooth = np.abs(np.log(hx[1:] / hx[:-1])) <= np.log(1.25)
        ok = (noise <= 0.1 * tol * scale) & smooth
        add("generator_interior", np.max(np.abs(disc - f.lf[1:-1])[ok]) if ok.any() else np.nan)
        for end in ("a", "b"):
            if not (data.included(spec, end) and np.isfinite(f.lf_at(end))):
                continue
            node = grid.incl_a if end == "a" else grid.incl_b
            trusted = disc[ok]
            d = trusted[:3] if end == "a" else trusted[-3:][::-1]
            # quadratic extrapolation onto a node end, Aitken along a tail
            lim = 3 * d[0] - 3 * d[1] + d[2] if node else _aitken(d[::-1])
            add(f"Lf_continuity_{end}", f.lf_at(end) - lim)
    for end in ("a", "b"):
        if spec.boundary(end).kind == ENTRANCE:
            s, v = (grid.s[:3], f.values[:3]) if end == "a" else (grid.s[-3:], f.values[-3:])
            d = np.diff(v) / np.diff(s)
            add(f"Dsf_{end}_entrance", d[0] if end == "a" else d[-1], limit=max(tol * scale, 1e-3 * scale))
    verdict = all(it["passed"] for it in items)
    return {"verdict": verdict, "checks": items}
