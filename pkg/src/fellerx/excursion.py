"""Monte Carlo for the extended process on the grid chain.

Paths are pieced together from excursions away from the boundary states of
the chain built by :mod:`fellerx.grid_oracle`: a boundary state holds the path
for a local-time clock, emits excursions (reflection into the first cell at
rate p2/s(a, a+eps), jumps by the lumped p4, death at rate p1) and the
minimal chain runs each excursion until it returns, reaches the other end or
dies.  Between boundary visits the chain is the embedded birth-death walk with
s-ratio step probabilities.

Resolvent estimates weight each sojourn by its conditional discounted
occupation ``g kappa / (r kappa + Lambda)`` and carry the survival factor
``Lambda / (r kappa + Lambda)`` of the independent Exp(r) clock as a product
weight, with Russian roulette once the weight is small.  This is unbiased and
needs no time horizon.

Random numbers come from counter-based SplitMix64 streams keyed by
(seed, stream, path index), so any subset of paths can be replayed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numba
import numpy as np

from .boundary import FellerBoundaryData
from .diffusion import DiffusionSpec, make_grid
from .errors import FellerError, HorizonTooSmall, InvalidBoundaryData, InvalidEps
from .grid_oracle import GridChain, discretize

START, DIFFUSION, REFLECT, JUMP, KILL = 0, 1, 2, 3, 4
TAGS = ("start", "diffusion", "reflect", "jump", "kill")
_TAG_CODE = {"reflect": REFLECT, "jump": JUMP}

HIT_A, HIT_B, KILLED, DISCOUNTED, RUNNING = 0, 1, 2, 3, 4
TERMINALS = ("hit_a", "hit_b", "killed", "discounted", "running")

_STREAM_PATHS, _STREAM_EXC, _STREAM_SINGLE = 1, 2, 3

DEFAULT_EPS = 0.025


# --------------------------------------------------------------------------
# random numbers

@numba.njit(cache=True)
def _mix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _uniform(st):
    st[0] = st[0] + np.uint64(0x9E3779B97F4A7C15)
    z = _mix(st[0])
    # strictly inside (0, 1)
    return ((z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _stream(key, index):
    st = np.empty(1, dtype=np.uint64)
    st[0] = _mix(key ^ _mix(np.uint64(index)))
    return st


def stream_key(seed: int, stream: int) -> np.uint64:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64((seed * 0x100000001B3 + stream * 0xD1B54A32D192ED03) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class Stream:
    """Handle for one reproducible random stream."""
    seed: int = 0
    index: int = 0
    stream: int = _STREAM_SINGLE

    @property
    def key(self):
        return stream_key(self.seed, self.stream)


def _as_stream(rng) -> Stream:
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, tuple):
        return Stream(*rng)
    return Stream(int(rng or 0))


# --------------------------------------------------------------------------
# chain tables

@dataclass
class ChainTables:
    """Flat tagged transition table of a :class:`GridChain`.

    Row ``i`` occupies ``ptr[i]:ptr[i+1]``; target ``-1`` is the cemetery.
    ``lam[i]`` is the total rate per unit of the state's clock ``kappa``.
    """

    chain: GridChain
    ptr: np.ndarray
    target: np.ndarray
    rate: np.ndarray
    tag: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray

    @property
    def n_states(self):
        return self.lam.size

    def row(self, i):
        sl = slice(self.ptr[i], self.ptr[i + 1])
        return self.target[sl], self.rate[sl], self.tag[sl]


def chain_tables(chain: GridChain) -> ChainTables:
    W = chain.W.tocsr()
    ptr, tgt, rate, tag = [0], [], [], []
    for i in range(chain.n_states):
        if i in chain.boundary_links:
            links = [(j, w, _TAG_CODE[t]) for j, w, t in chain.boundary_links[i]]
        else:
            sl = slice(W.indptr[i], W.indptr[i + 1])
            links = [(j, w, DIFFUSION) for j, w in zip(W.indices[sl], W.data[sl])]
        if chain.kill[i] > 0:
            links.append((-1, chain.kill[i], KILL))
        for j, w, t in links:
            tgt.append(j)
            rate.append(w)
            tag.append(t)
        ptr.append(len(tgt))
    ptr = np.asarray(ptr, dtype=np.int64)
    rate = np.asarray(rate, dtype=float)
    owner = np.repeat(np.arange(chain.n_states), np.diff(ptr))
    lam = np.bincount(owner, weights=rate, minlength=chain.n_states)
    kappa = np.asarray(chain.kappa, dtype=float)
    if np.any((kappa <= 0) & (lam <= 0)):
        raise InvalidBoundaryData("a state neither holds nor moves")
    return ChainTables(chain, ptr, np.asarray(tgt, dtype=np.int64), rate,
                       np.asarray(tag, dtype=np.int64), lam, kappa)


@numba.njit(cache=True)
def _pick(st, ptr, rate, i, total):
    u = _uniform(st) * total
    j = ptr[i]
    c = rate[j]
    last = ptr[i + 1] - 1
    while c < u and j < last:
        j += 1
        c += rate[j]
    return j


# --------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _resolvent_walks(key, n_paths, start, ptr, tgt, rate, lam, kappa, g, r, w_min,
                     max_steps, out, steps):
    truncated = 0
    for p in range(n_paths):
        st = _stream(key, p)
        i = start
        w = 1.0
        acc = 0.0
        k = 0
        while True:
            den = r * kappa[i] + lam[i]
            acc += w * g[i] * kappa[i] / den
            if lam[i] == 0.0:
                break
            w *= lam[i] / den
            j = _pick(st, ptr, rate, i, lam[i])
            k += 1
            if tgt[j] < 0:
                break
            i = tgt[j]
            if w < w_min:
                if _uniform(st) * w_min < w:
                    w = w_min
                else:
                    break
            if k >= max_steps:
                truncated += 1
                break
        out[p] = acc
        steps[p] = k
    return truncated


@numba.njit(cache=True)
def _excursions(key, n_exc, A, B, ptr, tgt, rate, tag, lam, kappa, g, r, w_min, max_steps,
                ret, integ, hit_b, first_tag, terminal, steps):
    for e in range(n_exc):
        st = _stream(key, e)
        j = _pick(st, ptr, rate, A, lam[A])
        first_tag[e] = tag[j]
        ret[e] = 0.0
        integ[e] = 0.0
        hit_b[e] = 0.0
        k = 1
        if tgt[j] < 0:
            terminal[e] = KILLED
            steps[e] = k
            continue
        i = tgt[j]
        w = 1.0
        acc = 0.0
        term = RUNNING
        while True:
            if i == A:
                ret[e] = w
                term = HIT_A
                break
            if i == B:
                hit_b[e] = w
                term = HIT_B
                break
            den = r * kappa[i] + lam[i]
            acc += w * g[i] * kappa[i] / den
            if lam[i] == 0.0:
                term = DISCOUNTED
                break
            w *= lam[i] / den
            jj = _pick(st, ptr, rate, i, lam[i])
            k += 1
            if tgt[jj] < 0:
                term = KILLED
                break
            i = tgt[jj]
            if w < w_min:
                if _uniform(st) * w_min < w:
                    w = w_min
                else:
                    term = DISCOUNTED
                    break
            if k >= max_steps:
                term = RUNNING
                break
        integ[e] = acc
        terminal[e] = term
        steps[e] = k


@numba.njit(cache=True)
def _real_time_path(st, start, ptr, tgt, rate, tag, lam, kappa, horizon, stop_mask, A, B,
                    first_free, max_events, times, states, tags, lt_a, lt_b):
    """Event list of one path in real time; returns (n_events, code, t_end, at_a, at_b)."""
    t = 0.0
    i = start
    n = 0
    la = 0.0
    lb = 0.0
    at_a = 0.0
    at_b = 0.0
    times[0] = 0.0
    states[0] = i
    tags[0] = 0
    lt_a[0] = 0.0
    lt_b[0] = 0.0
    n = 1
    code = RUNNING
    moved = False
    while True:
        if moved and stop_mask[i]:
            code = HIT_A if i == A else HIT_B
            break
        if not moved and not first_free and stop_mask[i]:
            code = HIT_A if i == A else HIT_B
            break
        if lam[i] == 0.0:
            tau = horizon - t
            dl = tau / kappa[i]
        else:
            dl = -np.log(_uniform(st)) / lam[i]
            tau = kappa[i] * dl
        done = t + tau >= horizon
        if done:
            tau = horizon - t
            dl = tau / kappa[i] if kappa[i] > 0 else 0.0
        if i == A:
            la += dl
            at_a += tau
        elif i == B:
            lb += dl
            at_b += tau
        t += tau
        if done:
            t = horizon
            break
        j = _pick(st, ptr, rate, i, lam[i])
        if n >= max_events:
            code = RUNNING
            break
        times[n] = t
        tags[n] = tag[j]
        lt_a[n] = la
        lt_b[n] = lb
        moved = True
        if tgt[j] < 0:
            states[n] = -1
            n += 1
            code = KILLED
            break
        i = tgt[j]
        states[n] = i
        n += 1
    return n, code, t, at_a, at_b, la, lb


# --------------------------------------------------------------------------
# data types

@dataclass
class PathSample:
    """A piecewise-constant path; ``states`` are in the user coordinate with
    NaN for the cemetery.  ``local_time_*`` are cumulative at each event."""

    times: np.ndarray
    states: np.ndarray
    tags: np.ndarray
    local_time_a: np.ndarray
    local_time_b: np.ndarray
    stagnant_time_a: float = 0.0
    stagnant_time_b: float = 0.0
    time_at_a: float = 0.0       # real time in the boundary state, cell included
    time_at_b: float = 0.0
    killed: bool = False
    kill_time: float = np.inf
    end_time: float = 0.0
    end_local_time_a: float = 0.0
    end_local_time_b: float = 0.0
    terminal: str = "running"
    flags: list = field(default_factory=list)

    def __len__(self):
        return self.times.size

    @property
    def total_local_time_a(self):
        return self.end_local_time_a

    @property
    def total_local_time_b(self):
        return self.end_local_time_b

    def tag_names(self):
        return [TAGS[t] for t in self.tags]

    def check_cemetery(self):
        """True when every state after the first death is the cemetery."""
        dead = np.isnan(self.states)
        if not dead.any():
            return True
        return bool(dead[np.argmax(dead):].all())

    def rows(self):
        """(t, x, tag) rows for CSV output."""
        return [(float(t), float(x), TAGS[k]) for t, x, k in zip(self.times, self.states, self.tags)]


@dataclass
class ExcursionSample:
    path: PathSample
    terminal: str
    lifetime: float
    component: str
    mass: float


@dataclass
class ResolventEstimate:
    value: float
    stderr: float
    n_paths: int
    r: float
    x0: Union[float, str]
    x_node: float
    eps: float
    seed: int
    mean_steps: float
    truncated_paths: int = 0
    method: str = "discounted-occupation"

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n_paths": self.n_paths, "r": self.r,
                "x0": self.x0, "x_node": self.x_node, "eps": self.eps, "seed": self.seed,
                "mean_steps": self.mean_steps, "truncated_paths": self.truncated_paths,
                "method": self.method}


# --------------------------------------------------------------------------
# setup

def mc_grid(spec: DiffusionSpec, eps: float):
    """Grid whose uniform spacing is ``eps`` (internal coordinate)."""
    width = spec.b - spec.a
    if not (eps > 0 and eps <= width / 2):
        raise InvalidEps(f"eps must lie in (0, {width / 2}]", eps=eps)
    n = int(round(width / eps)) + 1
    return make_grid(spec, n, tail_ratio=0.5, floor=1e-8)


@dataclass
class Simulator:
    spec: DiffusionSpec
    data: FellerBoundaryData
    eps: float
    chain: GridChain
    tables: ChainTables

    def state_of(self, x0) -> int:
        ch = self.chain
        if isinstance(x0, str):
            st = ch.state_a if x0 == "a" else ch.state_b
            if st is None:
                raise InvalidBoundaryData(f"endpoint {x0} is not in the state space")
            return int(st)
        y = self.spec.coordinate.inverse(x0) if self.spec.coordinate is not None else x0
        return int(ch.node_state[ch.grid.locate(y)])

    def user_x(self, state) -> float:
        x = self.chain.x[state]
        return float(self.spec.to_user(np.array([x]))[0])

    def g_states(self, g, g_a=None, g_b=None):
        return self.chain.g_on_states(g, g_a, g_b)


_SIM_CACHE: dict = {}


def simulator(data: FellerBoundaryData, spec: DiffusionSpec, eps: float = DEFAULT_EPS,
              boundary_order: int = 2) -> Simulator:
    key = (id(spec), id(data), float(eps), boundary_order)
    hit = _SIM_CACHE.get(key)
    if hit is not None and hit.spec is spec and hit.data is data:
        return hit
    grid = mc_grid(spec, eps)
    chain = discretize(spec, data, grid=grid, boundary_order=boundary_order)
    sim = Simulator(spec, data, eps, chain, chain_tables(chain))
    _SIM_CACHE[key] = sim
    if len(_SIM_CACHE) > 64:
        _SIM_CACHE.pop(next(iter(_SIM_CACHE)))
    return sim


def _sim(sim_or_data, spec, eps):
    if isinstance(sim_or_data, Simulator):
        return sim_or_data
    return simulator(sim_or_data, spec, DEFAULT_EPS if eps is None else eps)


# --------------------------------------------------------------------------
# paths

_MAX_EVENTS = 2_000_000


def _run_path(sim: Simulator, start, horizon, stream: Stream, stop=(), first_free=True,
              max_events=_MAX_EVENTS) -> PathSample:
    tb = sim.tables
    ch = sim.chain
    A = -1 if ch.state_a is None else ch.state_a
    B = -1 if ch.state_b is None else ch.state_b
    mask = np.zeros(tb.n_states, dtype=np.bool_)
    for s in stop:
        mask[s] = True
    # the stream is counter based, so a rerun with a larger buffer replays the same path
    cap = min(4096, max_events)
    while True:
        times, lt_a, lt_b = np.empty(cap), np.empty(cap), np.empty(cap)
        states = np.empty(cap, dtype=np.int64)
        tags = np.empty(cap, dtype=np.int64)
        st = _stream(stream.key, stream.index)
        n, code, t_end, at_a, at_b, la, lb = _real_time_path(
            st, start, tb.ptr, tb.target, tb.rate, tb.tag, tb.lam, tb.kappa, float(horizon), mask,
            A, B, first_free, cap, times, states, tags, lt_a, lt_b)
        if n < cap or cap >= max_events:
            break
        cap = min(4 * cap, max_events)
    idx = states[:n]
    xs = np.where(idx >= 0, sim.spec.to_user(ch.x[np.maximum(idx, 0)]), np.nan)
    p3 = sim.data.p3 if ch.state_a is not None else 0.0
    q3 = sim.data.q3 if ch.state_b is not None else 0.0
    killed = code == KILLED
    path = PathSample(times[:n].copy(), xs, tags[:n].copy(), lt_a[:n].copy(), lt_b[:n].copy(),
                      stagnant_time_a=p3 * la, stagnant_time_b=q3 * lb, time_at_a=at_a,
                      time_at_b=at_b, killed=killed, kill_time=t_end if killed else np.inf,
                      end_time=t_end, end_local_time_a=la, end_local_time_b=lb,
                      terminal=TERMINALS[code])
    if n >= max_events:
        path.flags.append("max_events")
    return path


_MINIMAL_DATA: dict = {}


def sample_minimal_path(spec: DiffusionSpec, x0: float, h: float = DEFAULT_EPS, rng=0,
                        horizon: float = np.inf) -> PathSample:
    """Embedded birth-death walk on a grid of spacing ``h``, absorbed at the
    grid cells next to accessible ends (inaccessible ends are never reached;
    pass a finite ``horizon`` there)."""
    acc = [spec.boundary(e).accessible for e in "ab"]
    data = _MINIMAL_DATA.get(id(spec))
    if data is None or data[0] is not spec:
        data = (spec, FellerBoundaryData(p1=1.0 if acc[0] else 0.0, q1=1.0 if acc[1] else 0.0))
        _MINIMAL_DATA[id(spec)] = data
        if len(_MINIMAL_DATA) > 64:
            _MINIMAL_DATA.pop(next(iter(_MINIMAL_DATA)))
    sim = simulator(data[1], spec, h)
    ch = sim.chain
    stops = [s for s in (ch.state_a, ch.state_b) if s is not None]
    start = sim.state_of(x0)
    if not np.isfinite(horizon) and not all(acc):
        raise HorizonTooSmall("an inaccessible end needs a finite horizon")
    path = _run_path(sim, start, horizon, _as_stream(rng), stop=stops, first_free=False)
    return path


def sample_excursion(data: FellerBoundaryData, spec: DiffusionSpec, eps: float = DEFAULT_EPS,
                     rng=0, end: str = "a", horizon: float = np.inf) -> ExcursionSample:
    """One excursion from the boundary state ``end`` under the eps-restricted
    excursion measure (normalised to a probability; ``mass`` is its total)."""
    sim = _sim(data, spec, eps)
    ch = sim.chain
    A = ch.state_a if end == "a" else ch.state_b
    if A is None:
        raise InvalidBoundaryData(f"endpoint {end} is not in the state space")
    tb = sim.tables
    mass = float(tb.lam[A])
    if mass <= 0:
        raise InvalidBoundaryData(f"no excursions leave {end}", end=end)
    stops = [s for s in (ch.state_a, ch.state_b) if s is not None]
    # force an immediate departure: the sojourn at A itself is not part of the excursion
    path = _run_path(sim, A, np.inf if not np.isfinite(horizon) else horizon,
                     _as_stream(rng), stop=stops, first_free=True)
    t0 = path.times[1] if path.times.size > 1 else 0.0
    path.times = path.times - t0
    path.times[0] = 0.0
    path.time_at_a = path.time_at_b = 0.0
    path.stagnant_time_a = path.stagnant_time_b = 0.0
    path.local_time_a = np.zeros_like(path.local_time_a)
    path.local_time_b = np.zeros_like(path.local_time_b)
    path.end_local_time_a = path.end_local_time_b = 0.0
    first = TAGS[path.tags[1]] if path.tags.size > 1 else "kill"
    term = path.terminal
    if end == "b" and term in ("hit_a", "hit_b"):
        term = "hit_b" if term == "hit_a" else "hit_a"
    return ExcursionSample(path, term, float(path.end_time - t0), first, mass)


def assemble_path(data: FellerBoundaryData, spec: DiffusionSpec, horizon: float,
                  eps: float = DEFAULT_EPS, rng=0, start: Union[str, float] = "a",
                  strict: bool = False) -> PathSample:
    """Path of the extended process up to ``horizon`` started at ``start``.

    A path that never completes an excursion before ``horizon`` is returned
    flagged ``horizon_too_small`` (raised instead when ``strict``).
    """
    if not horizon > 0:
        raise HorizonTooSmall("horizon must be positive", horizon=horizon)
    sim = _sim(data, spec, eps)
    ch = sim.chain
    s0 = sim.state_of(start)
    path = _run_path(sim, s0, horizon, _as_stream(rng))
    if s0 in (ch.state_a, ch.state_b):
        back = np.isin(path.states[1:-1], [sim.user_x(s) for s in (ch.state_a, ch.state_b)
                                           if s is not None])
        complete = path.killed or bool(back.any())
        if not complete:
            path.flags.append("horizon_too_small")
            if strict:
                raise HorizonTooSmall("no complete excursion before the horizon", horizon=horizon)
    return path


# --------------------------------------------------------------------------
# estimators

def mc_resolvent(data: FellerBoundaryData, spec: DiffusionSpec, g, r: float, x0, n_paths: int,
                 eps: Optional[float] = None, seed: int = 0, g_a=None, g_b=None,
                 w_min: float = 0.05, max_steps: int = 10**8) -> ResolventEstimate:
    """E_x0 int_0^inf e^{-rt} g(X_t) dt with its standard error."""
    if not r > 0:
        raise ValueError("r must be positive")
    sim = _sim(data, spec, eps)
    tb = sim.tables
    start = sim.state_of(x0)
    gs = np.ascontiguousarray(sim.g_states(g, g_a, g_b), dtype=float)
    if not np.all(np.isfinite(gs)):
        raise FellerError("g is not finite on the simulation grid")
    out = np.empty(n_paths)
    steps = np.empty(n_paths, dtype=np.int64)
    trunc = _resolvent_walks(stream_key(seed, _STREAM_PATHS) ^ np.uint64(start), n_paths, start,
                             tb.ptr, tb.target, tb.rate, tb.lam, tb.kappa, gs, float(r),
                             float(w_min), max_steps, out, steps)
    value = float(np.sum(out) / n_paths)
    se = float(np.std(out, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else np.nan
    return ResolventEstimate(value, se, int(n_paths), float(r), x0, sim.user_x(start),
                             sim.eps, int(seed), float(steps.mean()), int(trunc))


@dataclass
class ExcursionStats:
    """Per-excursion discounted statistics from one boundary state."""

    mass: float          # total rate of the eps-restricted excursion measure
    kappa: float         # clock coefficient of the boundary state
    g_end: float
    ret: np.ndarray      # e^{-r T_a} on return (product-weight estimate)
    integ: np.ndarray    # int_0^T e^{-rt} g
    hit_b: np.ndarray    # e^{-r T_b} on reaching the far end
    first_tag: np.ndarray
    terminal: np.ndarray
    steps: np.ndarray

    @property
    def n(self):
        return self.ret.size

    def component_counts(self):
        return {TAGS[k]: int(np.sum(self.first_tag == k)) for k in (REFLECT, JUMP, KILL)}

    def terminal_counts(self):
        return {TERMINALS[k]: int(np.sum(self.terminal == k)) for k in range(len(TERMINALS))}


def excursion_stats(data: FellerBoundaryData, spec: DiffusionSpec, g, r: float, n_exc: int,
                    eps: Optional[float] = None, seed: int = 0, end: str = "a", g_a=None,
                    g_b=None, w_min: float = 0.05, max_steps: int = 10**8) -> ExcursionStats:
    sim = _sim(data, spec, eps)
    ch, tb = sim.chain, sim.tables
    A = ch.state_a if end == "a" else ch.state_b
    B = ch.state_b if end == "a" else ch.state_a
    if A is None:
        raise InvalidBoundaryData(f"endpoint {end} is not in the state space")
    if tb.lam[A] <= 0:
        raise InvalidBoundaryData(f"no excursions leave {end}", end=end)
    gs = np.ascontiguousarray(sim.g_states(g, g_a, g_b), dtype=float)
    arrs = [np.empty(n_exc) for _ in range(3)] + [np.empty(n_exc, dtype=np.int64) for _ in range(3)]
    _excursions(stream_key(seed, _STREAM_EXC) ^ np.uint64(A), n_exc, A, -1 if B is None else B,
                tb.ptr, tb.target, tb.rate, tb.tag, tb.lam, tb.kappa, gs, float(r),
                float(w_min), max_steps, *arrs)
    return ExcursionStats(float(tb.lam[A]), float(tb.kappa[A]), float(gs[A]), *arrs)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.sum(x) / x.size), float(np.std(x, ddof=1) / np.sqrt(x.size))


@dataclass
class BoundaryIdentityEstimate:
    """psi R(a) = N(g) + H R(b) from independent Monte Carlo pieces."""

    psi: float
    psi_se: float
    N: float
    N_se: float
    H: float
    H_se: float
    R_a: ResolventEstimate
    R_b: Optional[ResolventEstimate]
    residual: float
    residual_se: float
    stats: ExcursionStats = field(repr=False, default=None)

    @property
    def ok(self):
        return abs(self.residual) <= 3 * self.residual_se

    def to_dict(self):
        out = {k: getattr(self, k) for k in ("psi", "psi_se", "N", "N_se", "H", "H_se",
                                             "residual", "residual_se")}
        out["R_a"] = self.R_a.to_dict()
        out["R_b"] = None if self.R_b is None else self.R_b.to_dict()
        return out


def mc_psi(data, spec, r, n_exc, eps=None, seed=0, end="a"):
    """Laplace exponent p3 r + n[1 - e^{-r T}] from excursions; (value, stderr)."""
    st = excursion_stats(data, spec, _zero, r, n_exc, eps, seed, end)
    m, se = _mean_se(1.0 - st.ret)
    return st.kappa * r + st.mass * m, st.mass * se


def mc_boundary_identity(data: FellerBoundaryData, spec: DiffusionSpec, g, r: float, n_exc: int,
             n_paths: int, eps: Optional[float] = None, seed: int = 0, g_a=None,
             g_b=None) -> BoundaryIdentityEstimate:
    sim = _sim(data, spec, eps)
    st = excursion_stats(sim, spec, g, r, n_exc, seed=seed, g_a=g_a, g_b=g_b)
    Ra = mc_resolvent(sim, spec, g, r, "a", n_paths, seed=seed + 1, g_a=g_a, g_b=g_b)
    Rb = None
    if sim.chain.state_b is not None:
        Rb = mc_resolvent(sim, spec, g, r, "b", n_paths, seed=seed + 2, g_a=g_a, g_b=g_b)
    m_ret, se_ret = _mean_se(1.0 - st.ret)
    m_int, se_int = _mean_se(st.integ)
    m_hb, se_hb = _mean_se(st.hit_b)
    psi = st.kappa * r + st.mass * m_ret
    N = st.kappa * st.g_end + st.mass * m_int
    H = st.mass * m_hb
    rb = 0.0 if Rb is None else Rb.value
    rb_se = 0.0 if Rb is None else Rb.stderr
    residual = psi * Ra.value - N - H * rb
    # delta method: excursion part with R fixed, plus the two resolvent estimates
    z = st.mass * ((1.0 - st.ret) * Ra.value - st.integ - st.hit_b * rb)
    _, se_z = _mean_se(z)
    residual_se = float(np.sqrt(se_z**2 + (psi * Ra.stderr)**2 + (H * rb_se)**2))
    return BoundaryIdentityEstimate(psi, st.mass * se_ret, N, st.mass * se_int, H, st.mass * se_hb, Ra, Rb,
                         float(residual), residual_se, st)
