"""Finite-difference oracle: a continuous-time chain on the grid whose
resolvent equations discretise (r - L) f = g together with the boundary rows.

Every state i carries a clock coefficient ``kappa_i`` (speed mass of its cell,
or stagnancy plus half-cell mass at a boundary state) and the row

    kappa_i (r f_i - g_i) = sum_j w_ij (f_j - f_i) - k_i f_i .

Interior rows use conductances 1/(s_{i+1} - s_i); a boundary state uses the
reflection rate p2 / s(a, x_1), the lumped jump measure and the killing rate.
``kappa = 0`` marks an instantaneous state.  The same chain drives the Monte
Carlo simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .boundary import FellerBoundaryData, lumped_weights
from .diffusion import ENTRANCE, REGULAR, DiffusionSpec, Grid, make_grid
from .errors import GridTooCoarse, InvalidBoundaryData, SingularSystem


@dataclass
class GridChain:
    spec: DiffusionSpec
    data: FellerBoundaryData
    grid: Grid
    x: np.ndarray            # state positions (internal coordinate)
    kappa: np.ndarray
    kill: np.ndarray
    W: sps.csr_matrix        # off-diagonal rates
    node_state: np.ndarray   # grid node -> state index
    state_a: Optional[int]
    state_b: Optional[int]
    merged_a: bool = False   # a is an instantly-left entrance merged into node 0
    merged_b: bool = False
    boundary_order: int = 2
    # boundary state -> [(target state, rate, tag)], tag in {reflect, jump};
    # killing is kept in ``kill``
    boundary_links: dict = field(default_factory=dict)

    @property
    def n_states(self):
        return self.x.size

    def generator_rows(self, r):
        """Sparse matrix of ``kappa r + sum w + k`` minus ``w``."""
        out_rate = np.asarray(self.W.sum(axis=1)).ravel()
        diag = self.kappa * r + out_rate + self.kill
        return (sps.diags(diag) - self.W).tocsc()

    def interior_row_sums(self):
        """Row sums of the generator restricted to interior node rows (zero)."""
        rows = np.setdiff1d(np.arange(self.n_states), [i for i in (self.state_a, self.state_b) if i is not None])
        out_rate = np.asarray(self.W.sum(axis=1)).ravel()
        Q = (self.W - sps.diags(out_rate + self.kill)).tocsr()
        return np.asarray(Q[rows].sum(axis=1)).ravel()

    def g_on_states(self, g, g_a=None, g_b=None):
        spec = self.spec
        if callable(g):
            with np.errstate(all="ignore"):
                vals = np.asarray(g(spec.to_user(self.x)), dtype=float)
            vals = np.broadcast_to(vals, self.x.shape).astype(float)
        else:
            vals = np.asarray(g, dtype=float).copy()
            if vals.shape == self.grid.x.shape:
                full = np.empty(self.n_states)
                full[self.node_state] = vals
                for st, i in ((self.state_a, 0), (self.state_b, -1)):
                    if st is not None and st not in self.node_state:
                        full[st] = vals[i]
                vals = full
        for st, given, i in ((self.state_a, g_a, 0), (self.state_b, g_b, -1)):
            if st is None:
                continue
            if given is not None:
                vals[st] = given
            elif not np.isfinite(vals[st]):
                vals[st] = vals[self.node_state[i]]
        return vals


def discretize(spec: DiffusionSpec, data: FellerBoundaryData, n: int = 2001,
               grid: Optional[Grid] = None, boundary_order: int = 2, **grid_kw) -> GridChain:
    """Build the chain on ``n`` nodes (or on a given grid)."""
    if grid is None:
        if n < 8:
            raise GridTooCoarse("need at least 8 nodes", n=n)
        grid = make_grid(spec, n, **grid_kw)
    if boundary_order not in (1, 2):
        raise ValueError("boundary_order must be 1 or 2")
    N = grid.n
    ca, cb = spec.classes
    in_a, in_b = data.included(spec, "a"), data.included(spec, "b")
    merged_a = in_a and ca.kind == ENTRANCE and not data.regular_for_itself(spec, "a")
    merged_b = in_b and cb.kind == ENTRANCE and not data.regular_for_itself(spec, "b")
    extra_a = in_a and not grid.incl_a and not merged_a
    extra_b = in_b and not grid.incl_b and not merged_b
    off = 1 if extra_a else 0
    node_state = np.arange(N) + off
    n_states = N + off + (1 if extra_b else 0)
    x = np.empty(n_states)
    x[node_state] = grid.x
    state_a = state_b = None
    if in_a:
        state_a = 0
        if extra_a:
            x[0] = spec.a
    if in_b:
        state_b = n_states - 1
        if extra_b:
            x[-1] = spec.b

    kappa = np.zeros(n_states)
    kill = np.zeros(n_states)
    rows, cols, vals = [], [], []

    tagged = {}

    def link(i, j, w, tag=None):
        if w > 0 and i != j:
            rows.append(i)
            cols.append(j)
            vals.append(w)
            if tag is not None:
                tagged.setdefault(i, []).append((int(j), float(w), tag))

    cond = 1.0 / np.diff(grid.s)
    kappa[node_state] = grid.dual
    for k in range(N - 1):
        link(node_state[k], node_state[k + 1], cond[k])
        link(node_state[k + 1], node_state[k], cond[k])
    if extra_a and ca.accessible:
        link(node_state[0], state_a, 1.0 / grid.ds_a)
    if extra_b and cb.accessible:
        link(node_state[-1], state_b, 1.0 / grid.ds_b)

    for end, st in (("a", state_a), ("b", state_b)):
        if st is None or (end == "a" and merged_a) or (end == "b" and merged_b):
            continue
        k1, k2, k3, mu = data.side(end)
        cls = spec.boundary(end)
        node_end = grid.incl_a if end == "a" else grid.incl_b
        if k2 and cls.kind != REGULAR:
            raise InvalidBoundaryData(f"reflection at the non-regular endpoint {end}")
        # a regular boundary node keeps its diffusive mass only through p2
        nb = node_state[0] if end == "a" else node_state[-1]
        if node_end:
            # replace the interior row of the boundary node
            for idx in [i for i, r_ in enumerate(rows) if r_ == nb]:
                vals[idx] = 0.0
            half = grid.dual[0] if end == "a" else grid.dual[-1]
            kappa[st] = k3 + (k2 * half if boundary_order == 2 else 0.0)
            inner = node_state[1] if end == "a" else node_state[-2]
            link(st, inner, k2 * (cond[0] if end == "a" else cond[-1]), "reflect")
        else:
            kappa[st] = k3
        kill[st] = k1
        if not mu.empty:
            w, w_far = lumped_weights(grid, mu, end)
            for j in np.nonzero(w)[0]:
                link(st, node_state[j], w[j], "jump")
            if w_far:
                far = state_b if end == "a" else state_a
                if far is None:
                    raise InvalidBoundaryData("jump measure charges an endpoint outside the state space")
                link(st, far, w_far, "jump")
    W = sps.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    W.eliminate_zeros()
    W.sum_duplicates()
    return GridChain(spec, data, grid, x, kappa, kill, W, node_state, state_a, state_b,
                     merged_a, merged_b, boundary_order, tagged)


@dataclass
class ChainSolution:
    chain: GridChain
    r: float
    states: np.ndarray

    @property
    def values(self):
        """Values on the grid nodes."""
        return self.states[self.chain.node_state]

    @property
    def x(self):
        return self.chain.grid.x

    def at(self, end):
        st = self.chain.state_a if end == "a" else self.chain.state_b
        return np.nan if st is None else float(self.states[st])

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.values)


def solve_resolvent(chain: GridChain, g, r: float, g_a=None, g_b=None) -> ChainSolution:
    """Solve the chain's resolvent equations for ``f``."""
    if not r > 0:
        raise ValueError("r must be positive")
    gs = chain.g_on_states(g, g_a, g_b)
    A = chain.generator_rows(r)
    rhs = chain.kappa * gs
    with np.errstate(all="ignore"):
        f = spla.spsolve(A, rhs)
    if not np.all(np.isfinite(f)):
        raise SingularSystem("grid system is singular")
    return ChainSolution(chain, r, f)
