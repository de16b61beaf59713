"""Command line entry point: ``fellerx <command> --config run.yaml [flags]``.

Exit codes: 0 success, 1 error (structured JSON report on stderr and in
``<out>/error.json``), 2 failed validation or failed domain check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from .boundary import extended_resolvent, generator_domain_check, from_functions, validate
from .config import COMMANDS, RunConfig, load
from .eigen import solve_eigen
from .errors import ConfigError, FellerError, InvalidBoundaryData
from .excursion import Stream, assemble_path, excursion_stats, mc_resolvent, simulator
from .grid_oracle import discretize, solve_resolvent
from .minimal import apply_minimal, make_kernel

DIGITS = 12


def num(v):
    """Fixed 12-significant-digit float (NaN -> None, inf -> string)."""
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(f"{v:.{DIGITS}g}") + 0.0


def clean(obj):
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return num(obj)
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(clean(obj), fh, indent=2)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.{DIGITS}g}" if isinstance(v, (float, np.floating)) else v for v in row])


def _rtag(r):
    return f"r{r:g}"


# --------------------------------------------------------------------------
# helpers shared by commands

def _user_x(spec, y):
    return spec.to_user(np.asarray(y, dtype=float))


def _internal(spec, x):
    return float(spec.coordinate.inverse(x)) if spec.coordinate is not None else float(x)


def _g_sup(spec, g, grid):
    vals = np.asarray(g(spec.to_user(grid.x)), dtype=float)
    return float(np.max(np.abs(np.broadcast_to(vals, grid.x.shape))))


def _value_at(x0, spec, at, interp):
    if x0 in ("a", "b"):
        return at(x0)
    return float(interp(_internal(spec, x0)))


def _require_g(cfg):
    if cfg.task.g is None:
        raise ConfigError("task needs 'g' for this command")
    return cfg.task.g


# --------------------------------------------------------------------------
# commands

def cmd_classify(cfg: RunConfig, args, out):
    spec = cfg.spec
    report = {}
    for end, cls in zip("ab", spec.classes):
        report[end] = cls.kind
    report["details"] = {end: {"kind": cls.kind, "accessible": cls.accessible,
                               "enterable": cls.enterable, "I_access": cls.i_access,
                               "I_enter": cls.i_enter}
                         for end, cls in zip("ab", spec.classes)}
    write_json(os.path.join(out, "classify.json"), report)
    print(json.dumps(clean({"a": report["a"], "b": report["b"]})))
    return 0


def cmd_eigen(cfg, args, out):
    summary = {}
    for r in cfg.task.r:
        eig = solve_eigen(cfg.spec, r, n=cfg.task.nodes)
        eig.to_csv(os.path.join(out, f"eigen_{_rtag(r)}.csv"))
        side = {"r": r, "nodes": int(eig.grid.n), "limits": eig.limits,
                "wronskian_residual": eig.wronskian_residual, "raw_wronskian": eig.raw_wronskian,
                "boundary_identities": eig.endpoint_identity_residual}
        write_json(os.path.join(out, f"eigen_{_rtag(r)}.json"), side)
        summary[_rtag(r)] = side
    print(json.dumps(clean({k: {"wronskian_residual": v["wronskian_residual"]}
                            for k, v in summary.items()})))
    return 0


def cmd_resolve(cfg, args, out):
    spec, data, task = cfg.spec, cfg.data, cfg.task
    g = _require_g(cfg)
    results = {}
    for r in task.r:
        tag = _rtag(r)
        side = {"r": r, "x0": task.x0}
        values = {}
        if task.minimal:
            eig = solve_eigen(spec, r, n=task.nodes)
            mr = apply_minimal(make_kernel(eig), g, bound=task.bound)
            write_csv(os.path.join(out, f"resolve_{tag}.csv"), ["x", "R0g", "DsR0g"],
                      zip(_user_x(spec, mr.grid.x), mr.values, mr.ds))
            side["minimal"] = {"limit_a": mr.limit("a"), "limit_b": mr.limit("b")}
            if task.x0 not in ("a", "b"):
                side["minimal"]["value"] = float(mr(_internal(spec, task.x0)))
            write_json(os.path.join(out, f"resolve_{tag}.json"), side)
            results[tag] = side
            continue
        use_analytic = args.oracle == "analytic" or args.also_oracle
        use_grid = args.oracle == "grid" or args.also_oracle
        columns, header = [], ["x"]
        mc = None
        if args.also_mc:
            mc = mc_resolvent(data, spec, g, r, task.x0, task.paths, eps=task.eps, seed=task.seed,
                              g_a=task.g_a, g_b=task.g_b)
        x_eval = task.x0 if (mc is None or task.x0 in ("a", "b")) else mc.x_node
        grid_x = None
        if use_analytic:
            eig = solve_eigen(spec, r, n=task.nodes)
            er = extended_resolvent(data, spec, eig, g, g_a=task.g_a, g_b=task.g_b)
            grid_x = eig.grid.x
            columns.append(er.values)
            header.append("analytic")
            values["analytic"] = _value_at(x_eval, spec, er.at, er)
            side["analytic"] = er.sidecar()
            gsup = _g_sup(spec, g, eig.grid)
        if use_grid:
            chain = discretize(spec, data, task.nodes)
            cs = solve_resolvent(chain, g, r, task.g_a, task.g_b)
            if grid_x is None:
                grid_x = cs.x
                columns.append(cs.values)
            else:
                columns.append(cs(grid_x))
            header.append("grid")
            values["grid"] = _value_at(x_eval, spec, cs.at, cs)
            side["grid"] = {"R_at_a": cs.at("a"), "R_at_b": cs.at("b"), "nodes": int(chain.grid.n)}
            gsup = _g_sup(spec, g, chain.grid)
        write_csv(os.path.join(out, f"resolve_{tag}.csv"), header,
                  zip(_user_x(spec, grid_x), *columns))
        if mc is not None:
            values["mc"] = mc.value
            side["mc"] = mc.to_dict()
        side["x_eval"] = x_eval
        side["values"] = values
        if len(values) > 1:
            se = mc.stderr if mc is not None else 0.0
            tol = max(1e-3 * gsup / r, 3 * se)
            names = list(values)
            pairs = {}
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    d = abs(values[names[i]] - values[names[j]])
                    pairs[f"{names[i]}-{names[j]}"] = {"difference": d, "tolerance": tol,
                                                       "agree": bool(d <= tol)}
            side["agreement"] = pairs
        write_json(os.path.join(out, f"resolve_{tag}.json"), side)
        results[tag] = {"values": values, **({"agreement": side["agreement"]} if "agreement" in side else {})}
    print(json.dumps(clean(results)))
    return 0


def cmd_simulate(cfg, args, out):
    spec, data, task = cfg.spec, cfg.data, cfg.task
    sim = simulator(data, spec, task.eps)
    rows, bookkeeping = [], []
    kappa = sim.tables.kappa
    for k in range(args.write_paths):
        path = assemble_path(sim, spec, task.horizon, rng=Stream(task.seed, k), start=task.x0)
        for t, x, tg in path.rows():
            rows.append((k, t, x, tg))
        bookkeeping.append({"path": k, "local_time_a": path.total_local_time_a,
                      "stagnant_time_a": path.stagnant_time_a,
                      "local_time_b": path.total_local_time_b,
                      "stagnant_time_b": path.stagnant_time_b,
                      "time_at_a": path.time_at_a, "time_at_b": path.time_at_b,
                      "killed": path.killed, "terminal": path.terminal, "flags": path.flags})
    write_csv(os.path.join(out, "paths.csv"), ["path", "t", "x", "tag"], rows)
    est = {"eps": sim.eps, "seed": task.seed, "horizon": task.horizon, "paths_written": args.write_paths,
           "stagnancy_bookkeeping": bookkeeping}
    if task.g is not None:
        est["resolvent"] = {}
        for r in task.r:
            e = mc_resolvent(sim, spec, task.g, r, task.x0, task.paths, seed=task.seed,
                             g_a=task.g_a, g_b=task.g_b)
            est["resolvent"][_rtag(r)] = e.to_dict()
    if task.excursions > 0:
        est["excursions"] = {}
        for end in ("a", "b"):
            st_idx = sim.chain.state_a if end == "a" else sim.chain.state_b
            if st_idx is None or sim.tables.lam[st_idx] <= 0:
                continue
            g = task.g if task.g is not None else (lambda x: np.zeros_like(np.asarray(x, dtype=float)))
            r = task.r[0]
            st = excursion_stats(sim, spec, g, r, task.excursions, seed=task.seed, end=end,
                                 g_a=task.g_a, g_b=task.g_b)
            est["excursions"][end] = {"mass": st.mass, "kappa": float(kappa[st_idx]), "r": r,
                                      "components": st.component_counts(),
                                      "terminals": st.terminal_counts(),
                                      "mean_one_minus_return": float(np.mean(1.0 - st.ret)),
                                      "psi": st.kappa * r + st.mass * float(np.mean(1.0 - st.ret))}
    write_json(os.path.join(out, "estimates.json"), est)
    print(json.dumps(clean({k: v for k, v in est.items() if k != "stagnancy_bookkeeping"})))
    return 0


def cmd_check_domain(cfg, args, out):
    spec, data, task = cfg.spec, cfg.data, cfg.task
    reports = {}
    ok = True
    for r in task.r:
        eig = solve_eigen(spec, r, n=task.nodes)
        if task.f is not None:
            if task.Lf is None:
                raise ConfigError("check-domain with 'f' also needs 'Lf'")
            f = from_functions(eig.grid, task.f, task.Lf)
            scale = max(1.0, float(np.max(np.abs(f.values))))
        else:
            g = _require_g(cfg)
            er = extended_resolvent(data, spec, eig, g, g_a=task.g_a, g_b=task.g_b)
            f = er.function
            scale = _g_sup(spec, g, eig.grid)
        rep = generator_domain_check(data, spec, f, scale=scale)
        reports[_rtag(r)] = rep
        ok = ok and rep["verdict"]
        if task.f is not None:
            break
    write_json(os.path.join(out, "check_domain.json"), reports)
    print(json.dumps(clean({k: v["verdict"] for k, v in reports.items()})))
    return 0 if ok else 2


def _validation_report(cfg):
    checks = validate(cfg.data, cfg.spec, raise_on_fail=False)
    failed = [c.name for c in checks if not c.passed]
    return {"passed": not failed, "failed": failed, "checks": [c.to_dict() for c in checks]}


def cmd_validate(cfg, args, out):
    rep = _validation_report(cfg)
    write_json(os.path.join(out, "validate.json"), rep)
    print(json.dumps(clean({"passed": rep["passed"], "failed": rep["failed"]})))
    return 0 if rep["passed"] else 2


HANDLERS = {"classify": cmd_classify, "eigen": cmd_eigen, "resolve": cmd_resolve,
            "simulate": cmd_simulate, "check-domain": cmd_check_domain, "validate": cmd_validate}
NEEDS_VALID_DATA = ("resolve", "simulate", "check-domain")


# --------------------------------------------------------------------------

def _r_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad r list {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("r values must be positive")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="fellerx", description="Feller boundary toolkit")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="defaults to task.command from the config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--r", type=_r_list, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--x0", default=None)
    p.add_argument("--minimal", action="store_true")
    p.add_argument("--oracle", choices=("analytic", "grid"), default="analytic")
    p.add_argument("--also-oracle", action="store_true")
    p.add_argument("--also-mc", action="store_true")
    p.add_argument("--write-paths", type=int, default=10)
    p.add_argument("--no-validate", action="store_true")
    return p


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    t = cfg.task
    over = {}
    for key in ("seed", "paths", "eps", "nodes", "r", "horizon", "out"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    if args.x0 is not None:
        over["x0"] = args.x0 if args.x0 in ("a", "b") else float(args.x0)
    if args.minimal:
        over["minimal"] = True
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    for key, lo in (("paths", 1), ("nodes", 3)):
        if key in over and over[key] < lo:
            raise ConfigError(f"--{key} must be at least {lo}")
    if "eps" in over and not over["eps"] > 0:
        raise ConfigError("--eps must be positive")
    return replace(cfg, task=replace(t, **over))


def _fail(exc, out, code=1):
    rep = exc.to_dict() if isinstance(exc, FellerError) else {"code": "fellerx.internal",
                                                              "message": str(exc)}
    if out is not None:
        try:
            os.makedirs(out, exist_ok=True)
            write_json(os.path.join(out, "error.json"), rep)
        except OSError:
            pass
    print(json.dumps(clean(rep)), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = _apply_flags(load(args.config), args)
        out = cfg.task.out
        command = args.command or cfg.task.command
        if command is None:
            raise ConfigError("no command given on the command line or in task.command")
        os.makedirs(out, exist_ok=True)
        if command in NEEDS_VALID_DATA and not args.no_validate:
            rep = _validation_report(cfg)
            if not rep["passed"]:
                write_json(os.path.join(out, "validate.json"), rep)
                return _fail(InvalidBoundaryData("boundary data failed validation", failed=rep["failed"]),
                             out, code=2)
        return HANDLERS[command](cfg, args, out)
    except FellerError as exc:
        return _fail(exc, out)
    except (ValueError, ArithmeticError) as exc:
        return _fail(exc, out)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
