import numpy as np
import pytest

from fellerx import (FellerBoundaryData, JumpMeasure, assemble_path, extended_resolvent,
                     mc_resolvent, sample_excursion, sample_minimal_path, solve_eigen)
from fellerx.errors import HorizonTooSmall, InvalidEps
from fellerx.excursion import (REFLECT, JUMP, KILL, Stream, excursion_stats, mc_psi, simulator,
                               stream_key)
from fellerx.fixtures import brownian, brownian_half_line, one, smooth_g

BM = brownian()
STICKY_BOTH = FellerBoundaryData(p2=1, p3=1, q2=1, q3=1)


def within(est, ref, se, k=3.0):
    return abs(est - ref) <= k * se


# ---------------------------------------------------------------- minimal paths

def test_minimal_hitting_probability():
    n = 20000
    hits = np.array([sample_minimal_path(BM, 0.25, 0.025, Stream(11, i)).terminal == "hit_b"
                     for i in range(n)], dtype=float)
    assert within(hits.mean(), 0.25, hits.std(ddof=1) / np.sqrt(n))


def test_minimal_laplace_transform():
    n, r = 20000, 0.5
    vals = np.empty(n)
    for i in range(n):
        p = sample_minimal_path(BM, 0.5, 0.025, Stream(12, i))
        vals[i] = np.exp(-r * p.end_time) if p.terminal == "hit_a" else 0.0
    ref = np.sinh(0.5) / np.sinh(1.0)
    assert within(vals.mean(), ref, vals.std(ddof=1) / np.sqrt(n))


def test_minimal_next_to_end_is_short():
    p = sample_minimal_path(BM, 0.025, 0.025, Stream(13, 0))
    lens = [len(sample_minimal_path(BM, 0.025, 0.025, Stream(13, i))) for i in range(200)]
    assert min(lens) == 2 and np.median(lens) <= 3
    assert p.terminal in ("hit_a", "hit_b")


def test_minimal_needs_horizon_at_natural_end():
    with pytest.raises(HorizonTooSmall):
        sample_minimal_path(brownian_half_line(), 1.0, 0.025, 0)
    p = sample_minimal_path(brownian_half_line(), 1.0, 0.025, 0, horizon=5.0)
    assert p.end_time <= 5.0


# ---------------------------------------------------------------- excursions

def test_killing_only_excursion():
    data = FellerBoundaryData(p1=0.7, q2=1)
    for i in range(20):
        e = sample_excursion(data, BM, 0.025, Stream(14, i))
        assert e.component == "kill" and e.terminal == "killed" and e.mass == pytest.approx(0.7)
        assert e.path.check_cemetery()


def test_jump_excursion_hits_b_by_scale():
    data = FellerBoundaryData(p4=JumpMeasure(atoms=((0.3, 1.0),)), q2=1)
    n = 10000
    hit = np.array([sample_excursion(data, BM, 0.025, Stream(15, i)).terminal == "hit_b"
                    for i in range(n)], dtype=float)
    assert within(hit.mean(), 0.3, hit.std(ddof=1) / np.sqrt(n))


def test_reflection_mass_scales_like_one_over_eps():
    data = FellerBoundaryData(p2=1, p3=1, q2=1)
    m1 = sample_excursion(data, BM, 0.05, Stream(16, 0)).mass
    m2 = sample_excursion(data, BM, 0.025, Stream(16, 0)).mass
    assert m1 == pytest.approx(1 / 0.05) and m2 / m1 == pytest.approx(2.0)


def test_invalid_eps():
    with pytest.raises(InvalidEps):
        sample_excursion(STICKY_BOTH, BM, 0.75, 0)
    with pytest.raises(InvalidEps):
        mc_resolvent(STICKY_BOTH, BM, one, 0.5, "a", 10, eps=0.0)


def test_component_frequencies_match_rates():
    data = FellerBoundaryData(p1=0.5, p2=1.0, p4=JumpMeasure(atoms=((0.5, 0.7), (1.0, 0.3))),
                              q2=1.0, q3=0.5)
    sim = simulator(data, BM, 0.025)
    A = sim.chain.state_a
    rates = {"reflect": 0.0, "jump": 0.0, "kill": float(sim.chain.kill[A])}
    for _, w, tag in sim.chain.boundary_links[A]:
        rates[tag] += w
    total = sum(rates.values())
    st = excursion_stats(sim, BM, one, 0.5, 20000, seed=3)
    counts = st.component_counts()
    assert total == pytest.approx(st.mass)
    for tag, rate in rates.items():
        p = rate / total
        se = np.sqrt(p * (1 - p) / st.n)
        assert within(counts[tag] / st.n, p, se), tag


# ---------------------------------------------------------------- assembled paths

def test_exponential_sojourn_then_death():
    data = FellerBoundaryData(p1=1.0, p3=2.0, q2=1)
    times = []
    for i in range(4000):
        p = assemble_path(data, BM, 1e6, 0.025, Stream(17, i))
        assert p.killed and len(p) == 2 and np.isnan(p.states[-1]) and p.states[0] == 0.0
        times.append(p.kill_time)
    times = np.array(times)
    # holding at a ends at rate p1/p3
    assert within(times.mean(), 2.0, 2.0 / np.sqrt(times.size))


def test_stagnancy_bookkeeping_and_stationary_fraction():
    frac = []
    for i in range(10):
        p = assemble_path(STICKY_BOTH, BM, 400.0, 0.025, Stream(18, i))
        assert p.stagnant_time_a == STICKY_BOTH.p3 * p.total_local_time_a
        assert p.stagnant_time_b == STICKY_BOTH.q3 * p.total_local_time_b
        # the boundary state also holds the half cell next to it
        assert p.time_at_a >= p.stagnant_time_a
        frac.append(p.stagnant_time_a / p.end_time)
    # stationary law: m on (0, 1) has mass 2, each sticky end carries p3/p2 = 1
    assert np.mean(frac) == pytest.approx(0.25, abs=0.02)


def test_stop_at_trap():
    data = FellerBoundaryData(p2=1, q3=1)
    p = assemble_path(data, BM, 50.0, 0.025, Stream(19, 1))
    at_b = np.nonzero(p.states == 1.0)[0]
    assert at_b.size == 1 and at_b[0] == len(p) - 1 and p.end_time == 50.0


def test_horizon_too_small_flag():
    data = FellerBoundaryData(p2=1, p3=1e6, q2=1)
    p = assemble_path(data, BM, 1e-6, 0.025, Stream(20, 0))
    assert "horizon_too_small" in p.flags
    with pytest.raises(HorizonTooSmall):
        assemble_path(data, BM, 1e-6, 0.025, Stream(20, 0), strict=True)


def test_path_rows_and_tags():
    p = assemble_path(STICKY_BOTH, BM, 2.0, 0.025, Stream(21, 0))
    rows = p.rows()
    assert rows[0][2] == "start" and all(r[2] in ("diffusion", "reflect", "jump", "kill") for r in rows[1:])
    assert np.all(np.diff(p.times) >= 0)


# ---------------------------------------------------------------- estimators

def test_seeded_determinism():
    a = mc_resolvent(STICKY_BOTH, BM, smooth_g, 0.5, "a", 2000, seed=5)
    b = mc_resolvent(STICKY_BOTH, BM, smooth_g, 0.5, "a", 2000, seed=5)
    c = mc_resolvent(STICKY_BOTH, BM, smooth_g, 0.5, "a", 2000, seed=6)
    assert a.to_dict() == b.to_dict() and a.value != c.value
    assert stream_key(1, 2) == stream_key(1, 2) and stream_key(1, 2) != stream_key(2, 1)


def test_conservative_one_over_r():
    est = mc_resolvent(STICKY_BOTH, BM, one, 0.5, 0.3, 2000, seed=1)
    assert within(est.value, 2.0, max(est.stderr, 1e-12)) or abs(est.value - 2.0) < 1e-9


@pytest.mark.slow
def test_sticky_killed_against_analytic():
    data = FellerBoundaryData(p2=1, p3=1, q1=1)
    ref = extended_resolvent(data, BM, solve_eigen(BM, 0.5, 2001), one).at("a")
    est = mc_resolvent(data, BM, one, 0.5, "a", 100000, seed=8)
    assert within(est.value, ref, est.stderr)


@pytest.mark.slow
def test_eps_refinement():
    data = FellerBoundaryData(p2=1, p3=1, q1=1)
    e1 = mc_resolvent(data, BM, smooth_g, 0.5, "a", 40000, eps=0.05, seed=9)
    e2 = mc_resolvent(data, BM, smooth_g, 0.5, "a", 40000, eps=0.025, seed=10)
    assert abs(e1.value - e2.value) <= 3 * np.hypot(e1.stderr, e2.stderr)


def test_mc_psi_pure_killing():
    v, se = mc_psi(FellerBoundaryData(p1=0.7, q2=1), BM, 0.5, 1000)
    assert v == pytest.approx(0.7) and se == 0.0
