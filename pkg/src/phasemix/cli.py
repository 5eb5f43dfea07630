"""Command-line front end.

State numbers on the command line are 1-based; ``n+1`` is the absorbing
state.  Failures print ``{"error": ..., "message": ...}`` on stderr and
exit with a non-zero status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import distributions as dist
from . import inference as inf
from . import presets, simulator
from .errors import PhasemixError
from .files import load_model, load_path, save_model
from .grids import GridSpec, fmt, grid_emit
from .model import ClosedSetFamily, structured_blocks, validate

__all__ = ["main", "build_parser", "run_example"]


class UsageError(PhasemixError):
    """Bad command-line arguments."""


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _range(text: str | None):
    if text is None:
        return None
    vals = _floats(text)
    if len(vals) != 2:
        raise UsageError(f"a range is 'lo,hi', got {text!r}")
    return tuple(vals)


def _scenario(args):
    """Scenario from --t/--state/--initial/--alive/--path (1-based states)."""
    state = None if args.state is None else args.state - 1
    initial = None if args.initial is None else args.initial - 1
    if args.path:
        record = load_path(args.path)
        if state is not None:
            return inf.FullPath(record, state)
        return inf.AliveFull(record) if args.alive else inf.PastOnlyFull(record)
    t = args.t
    if state is not None:
        return inf.CurrentOnly(state, t) if initial is None else inf.InitialAndCurrent(initial, state, t)
    if args.alive:
        return inf.AliveCurrentOnly(t) if initial is None else inf.AliveInitial(initial, t)
    return inf.NoInformation(t) if initial is None else inf.InitialOnly(initial, t)


def _load(args):
    if not args.model:
        raise UsageError("--model is required")
    model, family = load_model(args.model)
    validate(model, family).raise_if_invalid()
    return model, family


def _need_family(model, family, p=None):
    if family is None:
        raise UsageError("the model file has no 'gamma' closed sets")
    if p is not None and family.p != p:
        raise UsageError(f"this command needs {p} closed sets, the model has {family.p}")
    return family


def _write(args, text: str):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _table(args, header, rows):
    if args.format == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def cmd_validate(args):
    model, family = load_model(args.model)
    report = validate(model, family)
    _write(args, json.dumps(report.to_dict(), indent=2) + "\n")
    if not report.ok:
        report.raise_if_invalid()


def cmd_univariate(args):
    model, _ = _load(args)
    c = inf.condition(model, _scenario(args))
    points = _floats(args.s) if args.s else list(c.time + 0.5 * np.arange(17))
    rows = []
    for s in points:
        rows.append((s, dist.surv_uni(model, c, s), dist.dens_uni(model, c, s).density))
    if args.format == "json":
        out = {
            "t": c.time,
            "atom": c.atom,
            "points": [dict(zip(("s", "survival", "density"), r)) for r in rows],
            "mean": dist.moment_uni(model, c, 1),
            "second_moment": dist.moment_uni(model, c, 2),
        }
        _write(args, json.dumps(out, indent=2) + "\n")
    else:
        _write(args, _table(args, ("s", "survival", "density"), rows))


def cmd_bivariate_grid(args):
    model, family = _load(args)
    family = _need_family(model, family, 2)
    spec = GridSpec(step=args.step, t1_range=_range(args.t1_range), t2_range=_range(args.t2_range))
    _write(args, grid_emit(model, family, _scenario(args), spec))


def cmd_multivariate(args):
    model, family = _load(args)
    family = _need_family(model, family)
    times = _floats(args.times)
    scen = _scenario(args)
    c = inf.condition(model, scen)
    out = {"times": times, "survival": dist.surv_multi(model, c, family, times)}
    srt = sorted(times)
    if srt[0] > c.time and all(b > a for a, b in zip(srt, srt[1:])):
        out["density"] = dist.dens_multi(model, c, family, times)
    _write(args, json.dumps(out, indent=2) + "\n")


def cmd_limits(args):
    model, _ = _load(args)
    initial = None if args.initial is None else args.initial - 1
    states = range(model.n) if args.state is None else [args.state - 1]
    out = {
        "switching": {str(j + 1): inf.switching_limit(model, j, initial).tolist() for j in states},
        "state": inf.state_limit(model, initial).tolist(),
    }
    _write(args, json.dumps(out, indent=2) + "\n")


def cmd_simulate(args):
    model, family = _load(args)
    if family is None:
        family = ClosedSetFamily.absorption_only(model.n)
    scen = _scenario(args)
    config = simulator.SimConfig(n_paths=args.n_paths, seed=args.seed, horizon=args.horizon)
    times = _floats(args.times) if args.times else [scen.time] * family.p
    est, se = simulator.estimate_surv(model, family, scen, times, config)
    summary = {"estimate": est, "stderr": se, "n_paths": args.n_paths, "seed": args.seed, "times": times}
    if args.dump_paths:
        rng = np.random.Generator(np.random.Philox(key=[args.seed % (1 << 64), 1 << 62]))
        records = [simulator.sample_path(model, rng, config.horizon).record.to_dict() for _ in range(args.dump_count)]
        Path(args.dump_paths).write_text(json.dumps(records) + "\n", encoding="utf-8")
    _write(args, json.dumps(summary, indent=2) + "\n")


# -- worked examples ----------------------------------------------------------

EXAMPLE_PARAMS = {
    "exponential": {"a1", "a2", "b1", "b2", "p1", "t", "i"},
    "marshall-olkin": {"a1", "a2", "a3", "b1", "b2", "b3", "p1", "t", "i"},
    "birth-death": {"psi", "delta2", "t", "i"},
}


def _marginal_rows(sb, scenarios, axis):
    rows = []
    for s in axis:
        rows.append([s] + [dist.structured_marginal(sb, c, w, s) for c in scenarios for w in (1, 2)])
    return rows


def run_example(name: str, overrides: dict, out_dir) -> list:
    """Write the data files of a worked example into ``out_dir``; returns their paths."""
    if name not in EXAMPLE_PARAMS:
        raise UsageError(f"unknown example {name!r}; choose from {sorted(EXAMPLE_PARAMS)}")
    unknown = set(overrides) - EXAMPLE_PARAMS[name]
    if unknown:
        raise UsageError(f"example {name} has no parameters {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = float(overrides.get("t", 0.0))
    i = int(overrides.get("i", 1)) - 1
    if name == "birth-death":
        model, family = presets.birth_death_mixture(
            psi=overrides.get("psi", 0.5), delta2=overrides.get("delta2", 1.0)
        )
    else:
        p1 = overrides.get("p1", 0.4)
        a = [overrides.get(f"a{r}", d) for r, d in zip((1, 2, 3), (1.0, 2.0, 0.5))]
        b = [overrides.get(f"b{r}", d) for r, d in zip((1, 2, 3), (0.5, 0.25, 0.75))]
        if name == "exponential":
            model, family = presets.exponential_mixture(a[0], a[1], b[0], b[1], p=(p1, 0.5, 0.5))
        else:
            model, family = presets.marshall_olkin_mixture(a, b, p=(p1, 0.5, 0.5))
    if not 0 <= i < model.n:
        raise UsageError(f"state i={i + 1} is not transient")
    validate(model, family).raise_if_invalid()
    written = []

    def put(fname, text):
        path = out / fname
        path.write_text(text, encoding="utf-8")
        written.append(path)

    save_model(out / "model.json", model, family)
    written.append(out / "model.json")
    current = inf.condition(model, inf.CurrentOnly(i, t))
    spec = GridSpec()
    put("density_current.csv", grid_emit(model, family, current, spec))

    summary = {
        "example": name,
        "parameters": dict(overrides),
        "t": t,
        "i": i + 1,
        "switching_current": current.switching[:, i].tolist(),
        "singular_free": dist.singular_condition(model, family),
    }
    scenarios = [current]
    if name == "birth-death":
        alive = inf.condition(model, inf.AliveCurrentOnly(t))
        scenarios.append(alive)
        put("density_alive.csv", grid_emit(model, family, alive, spec))
        core = slice(0, 3)
        summary["alpha"] = alive.weight[core].tolist()
        summary["switching_core"] = alive.switching[1, core].tolist()
        summary["atom_alive"] = float(1.0 - alive.weight[core].sum())
    sb = structured_blocks(model.blocks, family, model)
    axis = spec.axis(t, 1)
    header = ["s"] + [f"{lab}_{tag}" for tag in ("current", "alive")[: len(scenarios)] for lab in ("tau1", "tau2")]
    rows = _marginal_rows(sb, scenarios, axis)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[fmt(x) for x in r] for r in rows])
    put("marginals.csv", buf.getvalue())

    shared = axis[axis > t]
    dv, _ = dist.dens_biv_points(model, current, family, shared, shared)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t1", "value"])
    w.writerows([[fmt(x), fmt(v)] for x, v in zip(shared, dv)])
    put("diagonal_current.csv", buf.getvalue())

    put("summary.json", json.dumps(summary, indent=2) + "\n")
    return written


def cmd_example(args):
    overrides = {
        k: getattr(args, k)
        for k in ("a1", "a2", "a3", "b1", "b2", "b3", "p1", "psi", "delta2", "t", "i")
        if getattr(args, k) is not None
    }
    written = run_example(args.name, overrides, args.out or f"example-{args.name}")
    sys.stdout.write(json.dumps({"written": [str(p) for p in written]}, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--out", help="output file (directory for 'example')")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--t", type=float, default=0.0, help="conditioning time")
    scen.add_argument("--state", type=int, help="observed current state (1-based)")
    scen.add_argument("--initial", type=int, help="observed initial state (1-based)")
    scen.add_argument("--alive", action="store_true", help="condition on survival only")
    scen.add_argument("--path", help="observed path JSON; sets t to its horizon")

    parser = argparse.ArgumentParser(prog="phasemix", description="Exit-time laws of Markov mixture processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check model admissibility")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("univariate", parents=[common, scen], help="survival and density of the absorption time")
    p.add_argument("--s", help="comma-separated evaluation times")
    p.set_defaults(func=cmd_univariate)

    p = sub.add_parser("bivariate-grid", parents=[common, scen], help="tabulate the joint law of two exit times")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--t1-range", help="lo,hi (default t,t+8)")
    p.add_argument("--t2-range", help="lo,hi (default t,t+8)")
    p.set_defaults(func=cmd_bivariate_grid)

    p = sub.add_parser("multivariate", parents=[common, scen], help="joint survival at one point")
    p.add_argument("--times", required=True, help="comma-separated t_1..t_p")
    p.set_defaults(func=cmd_multivariate)

    p = sub.add_parser("limits", parents=[common], help="long-run regime and state limits")
    p.add_argument("--state", type=int, help="only this current state (1-based)")
    p.add_argument("--initial", type=int, help="known initial state (1-based)")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("simulate", parents=[common, scen], help="Monte Carlo joint survival")
    p.add_argument("--n-paths", type=int, default=100_000)
    p.add_argument("--times", help="comma-separated t_1..t_p (default: all equal to t)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--dump-paths", help="write sampled paths as JSON records")
    p.add_argument("--dump-count", type=int, default=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", parents=[common], help="write the data of a worked example")
    p.add_argument("name", choices=sorted(EXAMPLE_PARAMS))
    for k in ("a1", "a2", "a3", "b1", "b2", "b3", "p1", "psi", "delta2", "t"):
        p.add_argument(f"--{k}", dest=k, type=float)
    p.add_argument("--i", dest="i", type=int, help="observed current state (1-based)")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (PhasemixError, OSError, json.JSONDecodeError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        violations = getattr(exc, "violations", None)
        if violations:
            err["violations"] = [v.to_dict() for v in violations]
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
