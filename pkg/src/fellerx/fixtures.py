"""Reference diffusions and boundary data used by tests and scripts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .boundary import FellerBoundaryData, JumpMeasure
from .diffusion import Compactifier, DiffusionSpec


@dataclass
class Fixture:
    name: str
    spec: DiffusionSpec
    data: FellerBoundaryData
    g: Callable
    case: str
    g_a: Optional[float] = None
    g_b: Optional[float] = None
    notes: str = ""


def smooth_g(x):
    return 1.0 + 0.5 * np.sin(3.0 * np.asarray(x, dtype=float))


def compact_g(x):
    """Smooth bounded g on [0, inf) that settles at infinity."""
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        y = np.where(np.isinf(x), 1.0, x / (1.0 + x))
    return 1.0 + 0.5 * np.sin(3.0 * y)


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def brownian(a=0.0, b=1.0, c=None):
    """Standard Brownian motion: s = x, m = 2x."""
    return DiffusionSpec(a=a, b=b, scale=lambda x: np.asarray(x, dtype=float),
                         speed=lambda x: 2.0 * np.asarray(x, dtype=float), c=c, name="bm")


def brownian_half_line():
    """Brownian motion on (0, inf) in the coordinate y = x/(1+x)."""
    def scale(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            return y / (1.0 - y)

    def speed(y):
        return 2.0 * scale(y)

    return DiffusionSpec(a=0.0, b=1.0, scale=scale, speed=speed, c=0.5,
                         coordinate=Compactifier(0.0, np.inf), name="bm_half_line")


def log_spec(kind):
    """The four textbook specs on (0, 1) classifying 0 as each Feller kind."""
    ident = lambda x: np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        log = lambda x: np.log(np.asarray(x, dtype=float))
    table = {
        "Regular": (ident, lambda x: 2.0 * np.asarray(x, dtype=float)),
        "Exit": (ident, log),
        "Entrance": (log, ident),
        "Natural": (log, log),
    }
    s, m = table[kind]
    return DiffusionSpec(a=0.0, b=1.0, scale=s, speed=m, name=f"{kind.lower()}_at_0")


def entrance_top():
    """s = -log(1-x), m = x on (0, 1): 0 regular, 1 entrance."""
    with np.errstate(all="ignore"):
        return DiffusionSpec(a=0.0, b=1.0, scale=lambda x: -np.log1p(-np.asarray(x, dtype=float)),
                             speed=lambda x: np.asarray(x, dtype=float), name="entrance_top")


def natural_entrance():
    """s = log(x/(1-x)), m = log x on (0, 1): 0 natural, 1 entrance."""
    def scale(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.log(x) - np.log1p(-x)

    def speed(x):
        with np.errstate(all="ignore"):
            return np.log(np.asarray(x, dtype=float))

    return DiffusionSpec(a=0.0, b=1.0, scale=scale, speed=speed, name="natural_entrance")


def bm_sticky_killed():
    return Fixture("bm_sticky_killed", brownian(), FellerBoundaryData(p2=1.0, p3=1.0, q1=1.0),
                   smooth_g, "4", notes="sticky reflection at 0, killed at 1")


def bm_sticky_both(g=one):
    return Fixture("bm_sticky_both", brownian(),
                   FellerBoundaryData(p2=1.0, p3=1.0, q2=1.0, q3=1.0), g, "4",
                   notes="conservative sticky reflection at both ends")


def bm_jump_elastic():
    data = FellerBoundaryData(
        p1=0.5, p2=1.0, p4=JumpMeasure(atoms=((0.5, 0.7), (1.0, 0.3))),
        q2=1.0, q3=0.5, q4=JumpMeasure(atoms=((0.25, 1.0), (0.0, 0.2))))
    return Fixture("bm_jump_elastic", brownian(), data, smooth_g, "4",
                   notes="elastic killing and jumps (including to the far end) at both ends")


def half_line_case1():
    # atom at y = 1/2 is x = 1 in the original coordinate
    data = FellerBoundaryData(p1=0.2, p2=1.0, p3=0.5, p4=JumpMeasure(atoms=((0.5, 0.5),)))
    spec = brownian_half_line()
    return Fixture("half_line_case1", spec, data, compact_g, "1",
                   notes="BM on [0, inf), infinity natural and not in the state space")


def half_line_case2():
    data = FellerBoundaryData(p2=1.0, p4=JumpMeasure(atoms=((1.0, 0.5),)),
                              q1=0.3, q3=1.0, q4=JumpMeasure(atoms=((0.5, 0.5),)),
                              include_b=True)
    return Fixture("half_line_case2", brownian_half_line(), data, compact_g, "2",
                   notes="BM on [0, inf], infinity natural and holding")


def entrance_case2():
    data = FellerBoundaryData(p2=1.0, p3=0.3, p4=JumpMeasure(atoms=((1.0, 0.5),)),
                              include_b=True, b_regular_for_itself=False)
    return Fixture("entrance_case2", entrance_top(), data, smooth_g, "2",
                   notes="1 is an entrance endpoint left instantly; jumps from 0 to 1")


def natural_entrance_case3():
    data = FellerBoundaryData(p1=0.3, p3=1.0, p4=JumpMeasure(atoms=((0.5, 0.5), (1.0, 0.2))),
                              include_a=True, include_b=True, b_regular_for_itself=False)
    return Fixture("natural_entrance_case3", natural_entrance(), data, smooth_g, "3",
                   notes="0 natural and sticky with jumps, 1 entrance left instantly")


def all_cases():
    return [bm_sticky_killed(), bm_sticky_both(smooth_g), bm_jump_elastic(), half_line_case1(),
            half_line_case2(), entrance_case2(), natural_entrance_case3()]
