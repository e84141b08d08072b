"""Command line front end.

Exit codes: 0 success (or a degenerate verdict), 10 nondegenerate verdict,
2 usage, 3 resource budget exceeded, 4 invalid input, 5 unsupported.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from . import rng as _rng
from .blockfactor import load_factor_spec, parse_factor_spec
from .errors import (ArityError, DomainError, ResourceError, SpecFileError, UnsupportedError)

EXIT_OK = 0
EXIT_NONDEGENERATE = 10
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_INPUT = 4
EXIT_UNSUPPORTED = 5


def _jsonify(x: Any):
    if isinstance(x, dict):
        return {str(k): _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonify(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def envelope(command: str, seed: int | None, result: dict, timestamp: bool = True) -> dict:
    out = {"command": command, "version": __version__, "seed": seed, "result": _jsonify(result)}
    if timestamp:
        out["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return out


def _flatten(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, json.dumps(obj) if isinstance(obj, list) else obj))


def render(report: dict, fmt: str, table: list[dict] | None = None) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=False)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# command", report["command"], "seed", report["seed"]])
    if table:
        keys = list(table[0].keys())
        w.writerow(keys)
        for row in table:
            w.writerow([row[k] for k in keys])
    else:
        rows: list = []
        _flatten("", report["result"], rows)
        w.writerow(["key", "value"])
        w.writerows(rows)
    return buf.getvalue()


def _load(args):
    if getattr(args, "factor", None):
        from .catalog import build

        try:
            return build(args.factor, {})
        except KeyError:
            raise SpecFileError(f"unknown catalog factor {args.factor!r}", field="--factor") from None
    if not args.input:
        raise SpecFileError("an --input factor file or --factor name is required")
    if args.input == "-":
        return parse_factor_spec(sys.stdin.read())
    return load_factor_spec(args.input)


# --- subcommands -------------------------------------------------------------

def cmd_analyze(args) -> tuple[dict, int, list | None]:
    from .variance import exact_moments, sigma_squared_mc, var_Sn_from_moments

    bf, src = _load(args)
    res: dict[str, Any] = {"factor": bf.name, "ell": bf.ell, "m": bf.m, "source": src.describe()}
    n_values = args.n or []
    if bf.is_table:
        ms = exact_moments(bf, src, tol=args.tolerance)
        res["method"] = "exact"
        res["moments"] = ms.to_dict()
        res["sigma2"] = float(ms.sigma2)
        exact_var = {n: var_Sn_from_moments(ms, n) for n in n_values}
        res["var_Sn"] = {str(n): float(v) for n, v in exact_var.items()}
        if ms.exact:
            res["var_Sn_exact"] = {str(n): str(v) for n, v in exact_var.items()}
        for n, v in exact_var.items():
            res[f"var_S{n}"] = float(v)
    else:
        n = n_values[-1] if n_values else 1000
        est = sigma_squared_mc(bf, src, max(n, bf.ell), args.reps, args.seed, args.workers)
        res["method"] = "monte-carlo"
        res["n"] = n
        res["reps"] = args.reps
        res["sigma2"] = est.estimate
        res["sigma2_se"] = est.std_error
        res["bias_note"] = "Var(S_n)/n = sigma^2 + O(1/n); no bias correction applied"
    return res, EXIT_OK, None


def cmd_decompose(args):
    from .variance import coboundary_decompose

    bf, src = _load(args)
    if not bf.is_table:
        raise UnsupportedError("decompose needs a finite table factor; use witness or clt for "
                               "continuous sources")
    r = coboundary_decompose(bf, src, tol=args.tolerance)
    code = EXIT_OK if r.degenerate else EXIT_NONDEGENERATE
    return r.to_dict(), code, None


def cmd_clt(args):
    from .clt import RN_TARGETS, rn_example_moments, simulate_clt

    bf, src = _load(args)
    n_list = args.n_list or args.n or [100, 1000]
    report = simulate_clt(bf, src, n_list, args.reps, args.seed, workers=args.workers)
    res = report.to_dict()
    if bf.name == "rn-example":
        mom = rn_example_moments(max(args.moment_reps, 10_000), args.seed, args.workers)
        res["rn_moments"] = {
            "m2": mom.m2, "m4": mom.m4, "m2_se": mom.std_errors[0], "m4_se": mom.std_errors[1],
            "m2_target": RN_TARGETS["m2"], "m4_target": RN_TARGETS["m4"],
            "non_normal_gap": mom.m4 - 3 * mom.m2 ** 2,
        }
    table = [{k: getattr(r, k) for k in report.CSV_FIELDS} for r in report.rows]
    return res, EXIT_OK, table


def cmd_bst(args):
    from .bst import bst_subtree_counts
    from .trees import BinaryTree
    from .limits import bst_fringe_density

    tree = BinaryTree(args.tree)
    n = (args.n or [2000])[-1]
    counts = bst_subtree_counts(n, tree, args.reps, args.seed, args.workers) / n
    res = {
        "tree": tree.code, "n": n, "reps": args.reps,
        "density_mean": float(counts.mean()),
        "density_se": float(counts.std(ddof=1) / math.sqrt(args.reps)),
        "density_limit": bst_fringe_density(tree),
        "count_variance_over_n": float(np.var(counts * n, ddof=1) / n),
    }
    return res, EXIT_OK, None


def _offspring(args):
    from .trees import OffspringDistribution

    text = args.offspring
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecFileError(exc.msg, field="--offspring", line=exc.lineno) from None
    else:
        obj = {"preset": text}
    if args.truncate is not None and "p" not in obj:
        obj["truncate"] = args.truncate
    return OffspringDistribution.parse(obj)


def cmd_gw(args):
    from .gw import gw_alpha_beta, gw_degeneracy_argument, gw_sigma_squared, gw_subtree_counts
    from .limits import gw_fringe_density
    from .trees import LinearSubtreeStatistic, OrderedTree

    off = _offspring(args)
    tree = OrderedTree.parse(args.tree)
    stat = LinearSubtreeStatistic.single(tree)
    n = (args.n or [2000])[-1]
    counts = gw_subtree_counts(n, tree, off, args.reps, args.seed, args.workers) / n
    ab = gw_alpha_beta(stat, off)
    res: dict[str, Any] = {
        "tree": tree.code, "offspring": off.describe(), "approximate": off.approximate,
        "n": n, "reps": args.reps,
        "density_mean": float(counts.mean()),
        "density_se": float(counts.std(ddof=1) / math.sqrt(args.reps)),
        "density_limit": gw_fringe_density(tree, off),
        "alpha": ab.alpha, "beta": ab.beta,
    }
    try:
        res["sigma2"] = float(gw_sigma_squared(stat, off, "exact"))
        res["sigma2_method"] = "exact"
    except ResourceError:
        est = gw_sigma_squared(stat, off, "mc", n=n, reps=args.reps, seed=args.seed,
                               workers=args.workers)
        res["sigma2"], res["sigma2_se"] = est.estimate, est.std_error
        res["sigma2_method"] = "monte-carlo"
    if args.certificate:
        res["certificate"] = gw_degeneracy_argument(stat, off).to_dict()
    return res, EXIT_OK, None


def cmd_witness(args):
    from .trees import LinearSubtreeStatistic

    if args.model == "bst":
        from .bst import bst_witness_check
        from .trees import BinaryTree

        stat = LinearSubtreeStatistic.single(BinaryTree(args.tree))
        ell = stat.max_size + 2
        n = (args.n or [3 * ell + 1])[-1]
        wit, f1, f2, chk = bst_witness_check(stat, n)
        res = {"model": "bst", "tree": args.tree, "n": n, "u_prime": wit.u_prime,
               "u_double_prime": wit.u_double_prime, "F_prime": f1, "F_double_prime": f2,
               "differs": chk.differs, "s_a": chk.s_a, "s_b": chk.s_b}
        differs = chk.differs
    else:
        from .gw import gw_degeneracy_argument
        from .trees import OrderedTree

        stat = LinearSubtreeStatistic.single(OrderedTree.parse(args.tree))
        off = _offspring(args)
        cert = gw_degeneracy_argument(stat, off, n=(args.n or [None])[-1])
        chk = cert.replay(stat)
        res = {"model": "gw", "tree": args.tree, "certificate": cert.to_dict(),
               "differs": chk.differs, "s_a": chk.s_a, "s_b": chk.s_b}
        differs = chk.differs
    res["verdict"] = "sigma2 > 0" if differs else "inconclusive"
    return res, EXIT_NONDEGENERATE if differs else EXIT_OK, None


COMMANDS = {
    "analyze": cmd_analyze, "decompose": cmd_decompose, "clt": cmd_clt,
    "bst": cmd_bst, "gw": cmd_gw, "witness": cmd_witness,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="factor specification file (JSON), '-' for stdin")
    common.add_argument("--factor", help="catalog factor name (e.g. rn-example)")
    common.add_argument("--seed", type=int, default=_rng.DEFAULT_SEED)
    common.add_argument("--reps", type=int, default=2000)
    common.add_argument("--n", type=int, action="append", help="path length (repeatable)")
    common.add_argument("--n-list", type=lambda s: [int(t) for t in s.split(",")],
                        help="comma-separated path lengths")
    common.add_argument("--tolerance", type=float, default=1e-9)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--truncate", type=int, default=None,
                        help="truncation point for infinite offspring presets")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit generated_at so reports are byte-identical across runs")

    p = argparse.ArgumentParser(prog="mdep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="moments, sigma^2 and Var(S_n)")
    sub.add_parser("decompose", parents=[common], help="coboundary decomposition or cycle witness")
    c = sub.add_parser("clt", parents=[common], help="Monte Carlo CLT diagnostics")
    c.add_argument("--moment-reps", type=int, default=10**6)
    b = sub.add_parser("bst", parents=[common], help="fringe counts in random BSTs")
    b.add_argument("--tree", default="100", help="preorder code, e.g. 100 for a leaf")
    g = sub.add_parser("gw", parents=[common], help="fringe counts in conditioned GW trees")
    g.add_argument("--tree", default="0", help="degree sequence, e.g. 2,0,0")
    g.add_argument("--offspring", default="poisson1", help="preset name or JSON {\"p\": [...]}")
    g.add_argument("--certificate", action="store_true")
    w = sub.add_parser("witness", parents=[common], help="certify sigma^2 > 0 by configurations")
    w.add_argument("--model", choices=("bst", "gw"), default="bst")
    w.add_argument("--tree", default="100")
    w.add_argument("--offspring", default='{"p": [0.25, 0.5, 0.25]}')
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result, code, table = COMMANDS[args.command](args)
    except ResourceError as exc:
        print(f"mdep: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SpecFileError, DomainError, ArityError) as exc:
        print(f"mdep: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnsupportedError as exc:
        print(f"mdep: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OSError as exc:
        print(f"mdep: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = envelope(args.command, args.seed, result, timestamp=not args.no_timestamp)
    sys.stdout.write(render(report, args.format, table))
    if args.format == "json":
        sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
