"""Run configuration: a YAML document with three blocks.

See the README for the full grammar.  Every error is raised as
:class:`ConfigError` carrying the line of the offending entry.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .boundary import FellerBoundaryData, JumpMeasure
from .diffusion import DiffusionSpec, Tabulated, from_sde, spec_from_densities
from .errors import ConfigError
from .expr import ExpressionError, parse

COMMANDS = ("classify", "eigen", "resolve", "simulate", "check-domain", "validate")


def _value(node: yaml.Node):
    if isinstance(node, yaml.MappingNode):
        return {k.value: _value(v) for k, v in node.value}
    if isinstance(node, yaml.SequenceNode):
        return [_value(v) for v in node.value]
    return yaml.safe_load(yaml.serialize(node)) if node.tag != "tag:yaml.org,2002:str" else node.value


class Block:
    """Mapping view that remembers where each key was written."""

    def __init__(self, node: Optional[yaml.MappingNode], name: str, parent_line: int = 1):
        self.name = name
        self.items = {}
        self.lines = {}
        self.line = parent_line
        if node is None:
            return
        if not isinstance(node, yaml.MappingNode):
            raise ConfigError(f"'{name}' must be a mapping", line=node.start_mark.line + 1)
        self.line = node.start_mark.line + 1
        for k, v in node.value:
            if k.value in self.items:
                raise ConfigError(f"duplicate key '{k.value}' in '{name}'", line=k.start_mark.line + 1)
            self.items[k.value] = v
            self.lines[k.value] = k.start_mark.line + 1

    def __contains__(self, key):
        return key in self.items

    def keys(self):
        return self.items.keys()

    def line_of(self, key):
        return self.lines.get(key, self.line)

    def node(self, key):
        return self.items.get(key)

    def sub(self, key) -> "Block":
        return Block(self.items.get(key), f"{self.name}.{key}" if self.name else key, self.line_of(key))

    def get(self, key, default=None):
        if key not in self.items:
            return default
        return _value(self.items[key])

    def fail(self, key, message):
        raise ConfigError(message, line=self.line_of(key), key=f"{self.name}.{key}")

    def check_keys(self, allowed):
        for k in self.items:
            if k not in allowed:
                self.fail(k, f"unknown key '{k}' in '{self.name}'")

    def number(self, key, default=None, positive=False, nonneg=False):
        if key not in self.items:
            return default
        raw = self.get(key)
        val = _to_float(raw)
        if val is None:
            self.fail(key, f"'{key}' must be a number, got {raw!r}")
        if positive and not val > 0:
            self.fail(key, f"'{key}' must be positive")
        if nonneg and not val >= 0:
            self.fail(key, f"'{key}' must be non-negative")
        return val

    def integer(self, key, default=None, minimum=None):
        if key not in self.items:
            return default
        raw = self.get(key)
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.fail(key, f"'{key}' must be an integer")
        if minimum is not None and raw < minimum:
            self.fail(key, f"'{key}' must be at least {minimum}")
        return raw

    def flag(self, key, default=None):
        if key not in self.items:
            return default
        raw = self.get(key)
        if not isinstance(raw, bool):
            self.fail(key, f"'{key}' must be true or false")
        return raw

    def expression(self, key):
        raw = self.get(key)
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            raw = repr(float(raw))
        if not isinstance(raw, str):
            self.fail(key, f"'{key}' must be an expression string")
        try:
            return parse(raw)
        except ExpressionError as exc:
            self.fail(key, f"bad expression for '{key}': {exc}")


def _to_float(raw):
    if isinstance(raw, bool):
        return None
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        t = raw.strip().lower()
        if t in ("inf", "+inf", "infinity"):
            return np.inf
        if t in ("-inf", "-infinity"):
            return -np.inf
        try:
            return float(t)
        except ValueError:
            return None
    return None


# --------------------------------------------------------------------------

@dataclass
class TaskConfig:
    command: Optional[str] = None
    r: list = field(default_factory=lambda: [0.5])
    g: Any = None
    g_a: Optional[float] = None
    g_b: Optional[float] = None
    x0: Any = "a"
    paths: int = 1000
    excursions: int = 0
    seed: int = 0
    nodes: int = 2001
    eps: float = 0.025
    horizon: float = 10.0
    out: str = "out"
    f: Any = None
    Lf: Any = None
    minimal: bool = False
    bound: Optional[float] = None


@dataclass
class RunConfig:
    spec: DiffusionSpec
    data: FellerBoundaryData
    task: TaskConfig
    name: str = ""
    path: Optional[str] = None
    text: str = ""


def _read_csv(path, base, block, key):
    full = path if os.path.isabs(path) else os.path.join(base, path)
    try:
        with open(full, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        block.fail(key, f"cannot read {path}: {exc.strerror}")
    try:
        data = np.array([[float(v) for v in r[:2]] for r in rows if _to_float(r[0]) is not None])
    except ValueError:
        block.fail(key, f"{path} must hold two numeric columns")
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        block.fail(key, f"{path} must hold at least two rows of (x, value)")
    try:
        return Tabulated(data[:, 0], data[:, 1])
    except Exception as exc:
        block.fail(key, f"{path}: {exc}")


def _function(block: Block, key, base):
    node = block.node(key)
    if isinstance(node, yaml.MappingNode):
        sub = block.sub(key)
        sub.check_keys({"csv"})
        if "csv" not in sub:
            sub.fail("csv", "tabulated function needs 'csv'")
        return _read_csv(str(sub.get("csv")), base, sub, "csv")
    return block.expression(key)


def _spec(block: Block, base) -> DiffusionSpec:
    block.check_keys({"interval", "c", "scale", "speed", "scale_density", "speed_density", "sde",
                      "name"})
    if "interval" not in block:
        raise ConfigError("spec needs 'interval'", line=block.line)
    iv = block.get("interval")
    if not (isinstance(iv, list) and len(iv) == 2):
        block.fail("interval", "'interval' must be [a, b]")
    a, b = (_to_float(v) for v in iv)
    if a is None or b is None or not a < b:
        block.fail("interval", "'interval' must be two numbers with a < b")
    c = block.number("c")
    name = str(block.get("name", ""))
    forms = [k for k in (("scale", "speed"), ("scale_density", "speed_density"), ("sde",))
             if any(x in block for x in k)]
    if len(forms) != 1:
        raise ConfigError("spec needs exactly one of scale/speed, scale_density/speed_density, sde",
                          line=block.line)
    form = forms[0]
    finite = np.isfinite(a) and np.isfinite(b)
    if c is not None and not a < c < b:
        block.fail("c", "'c' must lie inside the interval")
    if form == ("sde",):
        sde = block.sub("sde")
        sde.check_keys({"drift", "diffusion"})
        for k in ("drift", "diffusion"):
            if k not in sde:
                raise ConfigError(f"sde needs '{k}'", line=sde.line)
        mu, sigma = sde.expression("drift"), sde.expression("diffusion")
        if c is None:
            c = 0.5 * (a + b) if finite else (a + 1.0 if np.isfinite(a) else (b - 1.0 if np.isfinite(b) else 0.0))
        return from_sde(mu, sigma, a, b, c, name=name or "sde")
    for k in form:
        if k not in block:
            raise ConfigError(f"spec needs '{k}'", line=block.line)
    if not finite:
        block.fail("interval", "scale/speed forms need a finite interval (use the sde form)")
    if form == ("scale", "speed"):
        s, m = _function(block, "scale", base), _function(block, "speed", base)
        return DiffusionSpec(a=a, b=b, scale=s, speed=m, c=c, name=name)
    sd, md = block.expression("scale_density"), block.expression("speed_density")
    return spec_from_densities(sd, md, a, b, c=c, name=name)


def _to_internal(spec: DiffusionSpec, x):
    coord = spec.coordinate
    if coord is None:
        return float(x)
    return float(coord.inverse(x))


class _InternalDensity:
    """Density in the user coordinate seen from the internal one."""

    def __init__(self, fn, coord):
        self.fn, self.coord = fn, coord

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            return self.fn(self.coord(y)) * self.coord.derivative(y)


def _measure(block: Block, key, spec) -> JumpMeasure:
    if key not in block:
        return JumpMeasure()
    sub = block.sub(key)
    sub.check_keys({"atoms", "density", "support", "truncated_infinite"})
    atoms = []
    for item in sub.get("atoms", []) or []:
        if not (isinstance(item, list) and len(item) == 2):
            sub.fail("atoms", "each atom must be [x, mass]")
        x, w = (_to_float(v) for v in item)
        if x is None or w is None:
            sub.fail("atoms", "atom entries must be numbers")
        if not spec.to_user(np.array([spec.a]))[0] <= x <= spec.to_user(np.array([spec.b]))[0]:
            sub.fail("atoms", f"atom at {x} lies outside the interval")
        atoms.append((_to_internal(spec, x), w))
    density = support = None
    if "density" in sub:
        density = sub.expression("density")
        sup = sub.get("support")
        if not (isinstance(sup, list) and len(sup) == 2):
            sub.fail("support", "a density needs 'support: [lo, hi]'")
        lo, hi = (_to_float(v) for v in sup)
        if lo is None or hi is None or not lo < hi:
            sub.fail("support", "'support' must be [lo, hi] with lo < hi")
        support = (_to_internal(spec, lo), _to_internal(spec, hi))
        if spec.coordinate is not None:
            density = _InternalDensity(density, spec.coordinate)
    return JumpMeasure(atoms=tuple(atoms), density=density, support=support,
                       truncated_infinite=bool(sub.flag("truncated_infinite", False)))


def _boundary(block: Block, spec) -> FellerBoundaryData:
    block.check_keys({"a", "b", "case"})
    kw = {}
    for end, letter in (("a", "p"), ("b", "q")):
        side = block.sub(end)
        side.check_keys({f"{letter}1", f"{letter}2", f"{letter}3", f"{letter}4", "include",
                         "regular_for_itself"})
        for i in (1, 2, 3):
            kw[f"{letter}{i}"] = side.number(f"{letter}{i}", 0.0)
        kw[f"{letter}4"] = _measure(side, f"{letter}4", spec)
        kw[f"include_{end}"] = side.flag("include")
        kw[f"{end}_regular_for_itself"] = side.flag("regular_for_itself")
    case = block.get("case")
    kw["case_tag"] = None if case is None else str(case).strip("°")
    if kw["case_tag"] not in (None, "1", "2", "3", "4"):
        block.fail("case", "'case' must be one of 1, 2, 3, 4")
    return FellerBoundaryData(**kw)


def _task(block: Block) -> TaskConfig:
    block.check_keys({"command", "r", "g", "g_a", "g_b", "x0", "paths", "excursions", "seed",
                      "nodes", "eps", "horizon", "out", "f", "Lf", "minimal", "bound"})
    t = TaskConfig()
    cmd = block.get("command")
    if cmd is not None and cmd not in COMMANDS:
        block.fail("command", f"unknown command '{cmd}'")
    t.command = cmd
    if "r" in block:
        raw = block.get("r")
        raw = raw if isinstance(raw, list) else [raw]
        vals = [_to_float(v) for v in raw]
        if not vals or any(v is None or not v > 0 for v in vals):
            block.fail("r", "'r' must be a positive number or a list of them")
        t.r = vals
    for key in ("g", "f", "Lf"):
        if key in block:
            setattr(t, key, block.expression(key))
    t.g_a = block.number("g_a")
    t.g_b = block.number("g_b")
    if "x0" in block:
        raw = block.get("x0")
        if raw in ("a", "b"):
            t.x0 = raw
        else:
            v = _to_float(raw)
            if v is None:
                block.fail("x0", "'x0' must be a number, 'a' or 'b'")
            t.x0 = v
    t.paths = block.integer("paths", t.paths, minimum=1)
    t.excursions = block.integer("excursions", t.excursions, minimum=0)
    t.seed = block.integer("seed", t.seed, minimum=0)
    t.nodes = block.integer("nodes", t.nodes, minimum=3)
    t.eps = block.number("eps", t.eps, positive=True)
    t.horizon = block.number("horizon", t.horizon, positive=True)
    t.bound = block.number("bound", None, positive=True)
    t.minimal = block.flag("minimal", False)
    if "out" in block:
        t.out = str(block.get("out"))
    return t


def loads(text: str, base: str = ".", path: Optional[str] = None) -> RunConfig:
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax: {exc.problem}",
                          line=None if mark is None else mark.line + 1) from None
    if root is None:
        raise ConfigError("empty configuration", line=1)
    top = Block(root, "")
    top.check_keys({"name", "spec", "boundary", "task"})
    if "spec" not in top:
        raise ConfigError("missing 'spec' block", line=1)
    spec = _spec(top.sub("spec"), base)
    data = _boundary(top.sub("boundary"), spec)
    task = _task(top.sub("task"))
    return RunConfig(spec, data, task, name=str(top.get("name", spec.name)), path=path, text=text)


def load(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text, base=os.path.dirname(os.path.abspath(path)), path=path)
