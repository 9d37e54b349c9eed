"""Command-line driver.

Subcommands
-----------
run             iterate a scenario and write its trace CSV
check-params    print the bound report for one time index
dump-scenario   write a named scenario as JSON
list-scenarios  print the known scenario names

Exit codes: 0 success, 1 failed bound check, 2 unknown scenario,
3 unreadable scenario or parameter file, 4 divergence.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .exceptions import BoundsViolationError, DivergenceError, ParameterInfeasibleError, UnsupportedScenarioError
from .game import dump_game, load_game
from .metrics import certify_pn_enwe
from .precondition import SolverParams, check_bounds, suggest_params
from .scenarios import SCENARIOS, Scenario, _with_br, resolve_scenario
from .solver import AutoParams, ExplicitParams, run, run_best_response

OUT_ENV = "TVGNWE_OUT_DIR"
CERT_WINDOW = 50
CERT_TOL = 1e-6

EXIT_BOUNDS, EXIT_SCENARIO, EXIT_CONFIG, EXIT_DIVERGED = 1, 2, 3, 4


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_scenario(name, seed):
    if name in SCENARIOS:
        return resolve_scenario(name, seed)
    path = Path(name)
    if not path.suffix == ".json" and not path.exists():
        raise CLIError(f"unknown scenario {name!r}", EXIT_SCENARIO)
    try:
        game, x0 = load_game(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CLIError(f"cannot read scenario file {name}: {exc}", EXIT_CONFIG) from exc
    return _with_br(path.stem, game, np.zeros(game.dim) if x0 is None else x0)


def _load_params(path, game):
    try:
        with open(path) as fh:
            d = json.load(fh)
        N = game.N
        delta = np.broadcast_to(np.asarray(d["delta"], dtype=float), (N,))
        alpha = d.get("alpha")
        q = d.get("q")
        return SolverParams(delta, d["beta"], d["gamma"],
                            game.alpha(0) if alpha is None else alpha,
                            game.pf_vector(0) if q is None else q)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CLIError(f"cannot read parameter file {path}: {exc}", EXIT_CONFIG) from exc


def _params_source(args, game):
    if args.params == "auto":
        return AutoParams(margin=args.margin)
    return ExplicitParams(_load_params(args.params, game))


def _out_path(args, default_name):
    out_dir = os.environ.get(OUT_ENV)
    if args.out:
        out = Path(args.out)
        return Path(out_dir) / out.name if out_dir else out
    return Path(out_dir or ".") / default_name


def cmd_run(args):
    sc = _load_scenario(args.scenario, args.seed)
    game = sc.game
    if args.dynamics == "best_response":
        if sc.br is None:
            raise CLIError(f"{sc.name} has no closed-form best response", EXIT_SCENARIO)
        trace = run_best_response(game, sc.br, sc.x0, max_iters=args.iters,
                                  residual_tol=args.residual_tol)
    else:
        trace = run(game, _params_source(args, game), sc.x0, max_iters=args.iters,
                    residual_tol=args.residual_tol, strict=args.strict)
    path = _out_path(args, f"{sc.name.replace(':', '_')}_{args.dynamics}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    trace.write_csv(path)
    last = trace.rows[-1]
    final = trace.final
    k_end = last.k
    window = range(max(0, k_end - CERT_WINDOW + 1), k_end + 1)
    cert = certify_pn_enwe(final.x, final.sigma, game, window, tol=CERT_TOL)
    summary = {"final_residual": last.fp_residual, "final_violation": last.max_violation,
               "iters_used": trace.iters_used, "certified": cert.certified,
               "final_x": final.x.tolist(), "trace": str(path)}
    print(json.dumps(summary))
    return 0


def cmd_check_params(args):
    sc = _load_scenario(args.scenario, args.seed)
    game = sc.game
    if args.params == "auto":
        params = suggest_params(game, args.k, margin=args.margin)
    else:
        params = _load_params(args.params, game)
    rep = check_bounds(game, args.k, params)
    print(f"# scenario {sc.name}, k = {args.k}")
    print(f"# delta = {params.delta.tolist()}, beta = {params.beta:.15g}, "
          f"gamma = {params.gamma:.15g}")
    print(rep.format())
    return 0 if rep.ok else EXIT_BOUNDS


def cmd_dump_scenario(args):
    if args.scenario not in SCENARIOS:
        raise CLIError(f"unknown scenario {args.scenario!r}", EXIT_SCENARIO)
    sc = resolve_scenario(args.scenario, args.seed)
    path = _out_path(args, f"{args.scenario.replace(':', '_')}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_game(sc.game, path, x0=sc.x0)
    print(str(path))
    return 0


def cmd_list_scenarios(args):
    for name in SCENARIOS:
        print(name)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="tvgnwe",
                                 description="Equilibrium seeking on time-varying network games.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--scenario", required=True,
                       help="scenario name (see list-scenarios) or path to a scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="scenario seed override")
        if out:
            p.add_argument("--out", default=None, help="output file")

    def params(p):
        p.add_argument("--params", default="auto", help="'auto' or a parameter JSON file")
        p.add_argument("--margin", type=_margin, default=0.1,
                       help="safety margin for automatic parameters, in (0, 1)")

    p = sub.add_parser("run", help="iterate a scenario and write its trace")
    common(p)
    params(p)
    p.add_argument("--dynamics", choices=("gnwe", "best_response"), default="gnwe")
    p.add_argument("--iters", type=_nonneg_int, default=1000)
    p.add_argument("--residual-tol", type=float, default=0.0)
    p.add_argument("--strict", action="store_true", help="abort when the bound checks fail")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-params", help="print the parameter bound report")
    common(p, out=False)
    params(p)
    p.add_argument("--k", type=_nonneg_int, default=0, help="time index")
    p.set_defaults(func=cmd_check_params)

    p = sub.add_parser("dump-scenario", help="write a named scenario as JSON")
    common(p)
    p.set_defaults(func=cmd_dump_scenario)

    p = sub.add_parser("list-scenarios", help="print the known scenario names")
    p.set_defaults(func=cmd_list_scenarios)
    return ap


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _margin(s):
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("margin must lie in (0, 1)")
    return v


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BoundsViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUNDS
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ParameterInfeasibleError, UnsupportedScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
