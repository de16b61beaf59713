import math
import time

import numpy as np
import pytest

from fellerx import classify_boundary, feller_integrals, from_sde, spec_from_densities
from fellerx.diffusion import DiffusionSpec, make_grid
from fellerx.errors import NonMonotone, NonPositiveDiffusion
from fellerx.fixtures import brownian, log_spec

import oracles as O

KINDS = ["Regular", "Exit", "Entrance", "Natural"]


@pytest.mark.parametrize("kind", KINDS)
def test_feller_integrals_match_closed_forms(kind):
    spec = log_spec(kind)
    ia, ie = feller_integrals(spec, "a", 0.5)
    ra, re = O.feller_pair(kind, 0.5)
    for got, ref in ((ia, ra), (ie, re)):
        if math.isinf(ref):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(float(ref), rel=1e-4)


@pytest.mark.parametrize("kind", KINDS)
def test_classification_of_zero(kind):
    cls = classify_boundary(log_spec(kind), "a")
    assert cls.kind == kind
    assert cls.gamma == int(cls.accessible)
    assert (cls.kind == "Regular") == (cls.accessible and cls.enterable)


def test_classification_is_fast():
    t0 = time.perf_counter()
    for kind in KINDS:
        classify_boundary(log_spec(kind), "a")
    assert time.perf_counter() - t0 < 1.0


def test_bm_both_ends_regular():
    spec = brownian()
    assert [spec.boundary(e).kind for e in "ab"] == ["Regular", "Regular"]


def test_from_sde_zero_drift_is_identity_scale():
    spec = from_sde(lambda x: 0 * x, lambda x: 1 + 0 * x, 0.0, 1.0, 0.5)
    x = np.linspace(0.05, 0.95, 7)
    assert np.allclose(spec.s(x), x - 0.5, atol=1e-10)
    # m density 2: increments of m are twice those of x
    assert np.allclose(np.diff(spec.m(x)), 2 * np.diff(x), atol=1e-9)


def test_from_sde_ou_scale_matches_quadrature():
    spec = from_sde(lambda x: -x, lambda x: 1 + 0 * x, -1.0, 1.0, 0.5)
    for x in (-0.7, 0.0, 0.3, 0.9):
        assert spec.s(np.array([x]))[0] == pytest.approx(float(O.ou_scale(x)), rel=1e-8, abs=1e-10)


def test_from_sde_rejects_zero_diffusion():
    with pytest.raises(NonPositiveDiffusion):
        from_sde(lambda x: 0 * x, lambda x: 0 * x, 0.0, 1.0, 0.5).s(np.array([0.3]))


def test_half_line_infinity_is_natural():
    spec = from_sde(lambda x: 0 * x, lambda x: 1 + 0 * x, 0.0, np.inf, 1.0)
    assert spec.boundary("b").kind == "Natural"
    assert spec.boundary("a").kind == "Regular"


def test_densities_spec_classifies_natural():
    spec = spec_from_densities(lambda x: 1 / x, lambda x: 1 / x, 0.0, 1.0)
    assert classify_boundary(spec, "a").kind == "Natural"


def test_non_monotone_scale_rejected():
    spec = DiffusionSpec(a=0.0, b=1.0, scale=lambda x: np.sin(6 * np.asarray(x)),
                         speed=lambda x: np.asarray(x, dtype=float))
    with pytest.raises(NonMonotone):
        make_grid(spec, 101)


def test_grid_nodes_include_regular_ends_only():
    g = make_grid(log_spec("Natural"), 101)
    assert g.x[0] > 0 and g.x[-1] == 1.0
    assert not g.incl_a and g.incl_b
    assert np.all(np.diff(g.s) > 0) and np.all(np.diff(g.m) > 0)
