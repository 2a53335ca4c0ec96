"""Command line harness.

Exit codes: 0 ok, 1 a declared tolerance or structural check failed,
2 usage or configuration error (including unwritable output).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, config, experiments, mdp
from .analytic import UnreachableError, subset_age_table
from .bayesopt import WorstNodeAge, optimize
from .engine import run, run_replications, split_seeds
from .fitting import fit_exponent
from .protocols import VARIANTS, ProtocolSpec, TimestompPolicy
from .topology import KINDS, Network, TopologyError, build

OK, TOLERANCE_FAILURE, USAGE_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


# argument groups -------------------------------------------------------------


def _network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", default="fully_connected", help=f"topology kind ({', '.join(KINDS)}) or alias")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--f", type=int, default=1, help="neighbors per side for generalized_ring")
    p.add_argument("--lam", type=float, default=1.0, help="total gossip rate per node")
    p.add_argument("--lam-source", type=float, default=1.0, help="total source-to-network rate")
    p.add_argument("--lam-e", type=float, default=1.0, help="source self-update rate")
    p.add_argument("--network", default="", help="network text file; overrides --kind")


def _network(a) -> Network:
    if a.network:
        return Network.load(a.network)
    params = {"f": a.f} if a.kind == "generalized_ring" else {}
    return build(a.kind, a.n, lam=a.lam, lam_source=a.lam_source, lam_e=a.lam_e, **params)


def _protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", default="baseline_version", choices=VARIANTS)
    p.add_argument("--gap", type=float, default=0.0, help="G for g_gap")
    p.add_argument("--p-mut", type=float, default=0.0)
    p.add_argument("--unreliable-rate", type=float, default=0.0)
    p.add_argument("--adversaries", type=_ints, default=(), help="comma-separated node ids for timestomp")
    p.add_argument("--policy", type=_floats, default=(1.0, 0.0, 0.0, 1.0),
                   help="timestomp raise_out,lower_out,raise_in,lower_in")


def _protocol(a) -> ProtocolSpec:
    if len(a.policy) != 4:
        raise UsageError("--policy needs four probabilities")
    return ProtocolSpec(a.protocol, gap=a.gap, p_mut=a.p_mut, unreliable_rate=a.unreliable_rate,
                        adversaries=tuple(a.adversaries), policy=TimestompPolicy(*a.policy))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="INI file; section named after the subcommand")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--threads", type=int, default=1)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossipage", description="Timeliness of gossip networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact subset-recursion ages")
    _common(p)
    _network_args(p)
    p.add_argument("--metric", default="version", choices=("version", "aoi"))
    p.add_argument("--moments", type=int, default=1)
    p.add_argument("--subsets", action="store_true", help="write the whole subset table")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte Carlo replications of one network")
    _common(p)
    _network_args(p)
    _protocol_args(p)
    p.add_argument("--horizon", type=float, default=1000.0)
    p.add_argument("--warmup", type=float, default=-1.0, help="negative means 10%% of the horizon")
    p.add_argument("--replications", type=int, default=8)
    p.add_argument("--trace", default="", help="event trace CSV of the first replication")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a named experiment")
    _common(p)
    p.add_argument("--experiment", default="", help="name or id; see --list")
    p.add_argument("--quick", action="store_true", help="small sizes for smoke tests")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mdp", help="solve the energy-harvesting caching MDP")
    _common(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--b-max", type=int, default=1)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=_floats, default=(1.0,))
    p.add_argument("--x-max", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_mdp)

    p = sub.add_parser("bayesopt", help="GP-UCB source-rate allocation")
    _common(p)
    p.add_argument("--network", default="", help="network text file (default: built-in 4-node line)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--replications", type=int, default=1, help="simulations per evaluation")
    p.set_defaults(func=cmd_bayesopt)

    p = sub.add_parser("fit", help="log-log slope of a CSV column against n")
    _common(p)
    p.add_argument("input", help="CSV file with a header row")
    p.add_argument("--x", default="n")
    p.add_argument("--y", default="v_hat")
    p.add_argument("--where", action="append", default=[], help="column=value filter, repeatable")
    p.add_argument("--expect", type=_floats, default=(), help="lo,hi slope range; exit 1 if outside")
    p.set_defaults(func=cmd_fit)
    return parser


# helpers -------------------------------------------------------------------


def _open_out(path: str):
    if path in ("-", ""):
        return _Stdout()
    try:
        return open(path, "w", newline="")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        return False


def _write_rows(path: str, rows) -> None:
    res = experiments.Result(0, "")
    res.rows = list(rows)
    text = res.csv_text()
    with _open_out(path) as fh:
        fh.write(text)


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse once for --config, feed its section in as defaults, parse again."""
    a = parser.parse_args(argv)
    if not getattr(a, "config", None) or a.command == "sweep":
        return a
    sub = parser._subparsers._group_actions[0].choices[a.command]
    try:
        raw = config.read_raw(Path(a.config).read_text())
    except OSError as e:
        raise UsageError(f"cannot read config {a.config}: {e}") from None
    extra = set(raw) - {a.command}
    if extra:
        raise config.ConfigError(f"{a.config}: unknown section(s) {sorted(extra)} for '{a.command}'")
    dests = {act.dest: act for act in sub._actions if act.dest not in ("help", "config", "func")}
    values = {}
    for key, val in raw.get(a.command, {}).items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise config.ConfigError(f"{a.config}: unknown key {key!r} in [{a.command}]")
        if isinstance(dests[dest], argparse._StoreTrueAction):
            values[dest] = config._coerce(val, False, f"{a.config} [{a.command}] {key}")
        else:
            values[dest] = val  # argparse applies the option's type to string defaults
    sub.set_defaults(**values)
    return parser.parse_args(argv)


# commands --------------------------------------------------------------------


def cmd_exact(a) -> int:
    net = _network(a)
    table = subset_age_table(net, a.metric, a.moments)
    if a.subsets:
        if a.out in ("-", ""):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["subset_bitmask", "v"] + [f"moment{m}" for m in range(2, a.moments + 1)])
            for mask in range(1, 1 << net.n):
                w.writerow([mask] + [repr(float(v)) for v in table.values[mask, 1:]])
            sys.stdout.write(buf.getvalue())
        else:
            try:
                table.to_csv(a.out)
            except OSError as e:
                raise UsageError(f"cannot write {a.out}: {e}") from None
        return OK
    rows = []
    for m in range(1, a.moments + 1):
        vals = table.node_values(m)
        for i, v in enumerate(vals):
            rows.append((net.n, "exact", f"{a.metric}:m{m}", i + 1, None, None, float(v), "exact"))
    _write_rows(a.out, rows)
    return OK


def cmd_simulate(a) -> int:
    net = _network(a)
    proto = _protocol(a)
    warmup = None if a.warmup < 0 else a.warmup
    metric = proto.metric
    if a.trace:
        run(net, proto, a.horizon, warmup, split_seeds(a.seed, 1, 0, 1)[0], trace=a.trace)
    if a.replications >= 2:
        m = run_replications(net, proto, a.horizon, warmup, master_seed=a.seed, replications=a.replications,
                             threads=a.threads)
        se = m.se(metric)
    else:
        m = run(net, proto, a.horizon, warmup, split_seeds(a.seed, 1)[0])
        se = np.full(net.n, np.nan)
    analytic = np.full(net.n, np.nan)
    if net.n <= 16 and proto.variant in ("baseline_version", "baseline_aoi"):
        try:
            analytic = subset_age_table(net, metric).node_values(1)
        except UnreachableError:
            pass
    rows = []
    param = f"T={a.horizon:g}"
    for i in range(net.n):
        an = float(analytic[i]) if np.isfinite(analytic[i]) else None
        rows.append((net.n, proto.variant, param, i + 1, float(m.age(metric)[i]),
                     float(se[i]) if np.isfinite(se[i]) else None, an, "exact" if an is not None else ""))
    avg, avg_se = m.network_average(metric)
    rows.append((net.n, proto.variant, param, "avg", avg, avg_se if np.isfinite(avg_se) else None, None, ""))
    if m.fraction is not None:
        rows.append((net.n, proto.variant, param, "fraction", float(m.fraction),
                     None if m.fraction_se is None else float(m.fraction_se), None, ""))
    if m.minset_age is not None:
        rows.append((net.n, proto.variant, param, "minset", float(m.minset_age),
                     None if m.minset_se is None else float(m.minset_se), None, ""))
    _write_rows(a.out, rows)
    return OK


def _sweep_config(path: str) -> tuple[experiments.Experiment, dict, dict]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    raw = config.read_raw(text)
    name = raw.get("experiment", {}).get("name", "").strip()
    if not name:
        raise config.ConfigError(f"{path}: [experiment] needs a name")
    exp = _experiment(name)
    schema = {"experiment": {"name": "", "seed": 0, "threads": 1, "quick": False},
              "params": exp.defaults, "output": {"path": ""}}
    vals = config.parse(text, schema, path)
    overrides = {k: v for k, v in vals["params"].items() if k in raw.get("params", {})}
    return exp, overrides, vals


def _experiment(name: str) -> experiments.Experiment:
    try:
        return experiments.get(name)
    except KeyError as e:
        raise UsageError(e.args[0]) from None


def cmd_sweep(a) -> int:
    if a.list:
        for e in sorted(experiments.REGISTRY.values(), key=lambda e: e.exp_id):
            print(f"{e.exp_id:2d} {e.name}")
        return OK
    overrides, quick, seed, threads, out = {}, a.quick, a.seed, a.threads, a.out
    given = {t.split("=")[0] for t in a._argv}
    if a.config:
        exp, overrides, vals = _sweep_config(a.config)
        quick = quick or vals["experiment"]["quick"]
        if "--seed" not in given:
            seed = vals["experiment"]["seed"]
        if "--threads" not in given:
            threads = vals["experiment"]["threads"]
        if "--out" not in given and vals["output"]["path"]:
            out = vals["output"]["path"]
    elif a.experiment:
        exp = _experiment(a.experiment)
    else:
        raise UsageError("sweep needs --config or --experiment (see --list)")
    res = exp.run(overrides, seed=seed, threads=threads, quick=quick)
    text = res.csv_text()
    with _open_out(out) as fh:
        fh.write(text)
    print(res.summary(), file=sys.stderr if out in ("-", "") else sys.stdout)
    return OK if res.passed else TOLERANCE_FAILURE


def cmd_mdp(a) -> int:
    try:
        model = mdp.build(a.n, a.b_max, a.delta, a.p, a.q, a.x_max)
    except ValueError as e:
        raise UsageError(str(e)) from None
    pol = mdp.solve(model, tol=a.tol)
    rep = mdp.verify_threshold(pol)
    if a.out in ("-", ""):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["b", "XC"] + [f"X{i + 1}" for i in range(model.n)] + ["action"])
        for s, act in zip(model.states, pol.actions):
            w.writerow([int(s[0]), int(s[-1])] + [int(x) for x in s[1:-1]] + [int(act)])
        sys.stdout.write(buf.getvalue())
        report = sys.stderr
    else:
        try:
            pol.to_csv(a.out)
        except OSError as e:
            raise UsageError(f"cannot write {a.out}: {e}") from None
        report = sys.stdout
    print(f"gain {pol.gain!r} after {pol.iterations} sweeps", file=report)
    print(f"independent of X_1..X_n: {rep.independent}; threshold in X_C: {rep.threshold}", file=report)
    print(f"thresholds by battery level: {rep.thresholds} (trivial slices {rep.trivial_slices})", file=report)
    for v in rep.violations[:20]:
        print(f"  violation at {v}", file=report)
    return OK if rep.ok else TOLERANCE_FAILURE


def cmd_bayesopt(a) -> int:
    net = Network.load(a.network) if a.network else experiments.bo_network()
    ev = WorstNodeAge(net, horizon=a.horizon, seed=experiments._subseed(a.seed, 14, 0),
                      replications=a.replications)
    res = optimize(ev, net.n, steps=a.steps, lam=a.budget, seed=experiments._subseed(a.seed, 14, 1))
    if a.out in ("-", ""):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m"] + [f"lambda_{i + 1}" for i in range(net.n)] + ["a_hat", "incumbent"])
        for m, (x, v, inc) in enumerate(zip(res.xs, res.values, res.incumbent), start=1):
            w.writerow([m] + [repr(float(t)) for t in x] + [repr(float(v)), repr(float(inc))])
        sys.stdout.write(buf.getvalue())
        report = sys.stderr
    else:
        try:
            res.to_csv(a.out)
        except OSError as e:
            raise UsageError(f"cannot write {a.out}: {e}") from None
        report = sys.stdout
    print(f"best a_hat {res.best_value!r} at lambda {[round(float(v), 6) for v in res.best_x]}", file=report)
    return OK


def cmd_fit(a) -> int:
    try:
        with open(a.input, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise UsageError(f"cannot read {a.input}: {e}") from None
    for cond in a.where:
        col, sep, val = cond.partition("=")
        if not sep:
            raise UsageError(f"--where needs column=value, got {cond!r}")
        rows = [r for r in rows if r.get(col) == val]
    if not rows:
        raise UsageError("no rows left to fit")
    for col in (a.x, a.y):
        if col not in rows[0]:
            raise UsageError(f"column {col!r} not in {a.input}")
    try:
        fit = fit_exponent((float(r[a.x]), float(r[a.y])) for r in rows)
    except ValueError as e:
        raise UsageError(str(e)) from None
    line = f"slope {fit.slope!r} intercept {fit.intercept!r} r2 {fit.r2!r}"
    with _open_out(a.out) as fh:
        fh.write(line + "\n")
    if a.expect:
        if len(a.expect) != 2:
            raise UsageError("--expect needs lo,hi")
        lo, hi = a.expect
        if not lo <= fit.slope <= hi:
            print(f"slope {fit.slope:.4f} outside [{lo}, {hi}]", file=sys.stderr)
            return TOLERANCE_FAILURE
    return OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    try:
        a = _apply_config(parser, argv)
    except SystemExit as e:  # argparse usage errors
        return int(e.code) if isinstance(e.code, int) else USAGE_ERROR
    except (UsageError, config.ConfigError) as e:
        print(f"gossipage: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    a._argv = argv
    logging.basicConfig(level=logging.INFO if a.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except (UsageError, config.ConfigError, TopologyError, UnreachableError, ValueError) as e:
        print(f"gossipage: error: {e}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
