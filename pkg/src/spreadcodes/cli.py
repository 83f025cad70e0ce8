"""Command line interface: ``run``, ``generate``, ``eval`` and ``bench``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time

import numpy as np

from .bcd import BcdConfig, SelectionStrategy, run, select_subset
from .core import FamilyFormatError, load_family, save_family
from .correlation import acz_count, build_table, stage_one_objective
from .generators import GoldSpec, WeilSpec, acz_subset, gold_family, random_family, weil_family
from .subproblem import STAGE_TWO, build_partial, multilinear_form, solve

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# key in a run config file -> (argparse dest, converter)
RUN_KEYS = {
    "n": ("n", int),
    "m": ("m", int),
    "block_size": ("block_size", int),
    "max_active_cols": ("max_active_cols", int),
    "max_per_col": ("max_per_col", int),
    "init": ("init", str),
    "seed": ("seed", int),
    "max_iters": ("max_iters", int),
    "time_limit": ("time_limit", float),
    "patience": ("patience", int),
    "solver": ("solver", str),
    "out": ("out", str),
    "checkpoint_every": ("checkpoint_every", int),
    "threads": ("threads", int),
}

RUN_DEFAULTS = {
    "block_size": 1,
    "max_active_cols": None,
    "max_per_col": None,
    "init": "random",
    "seed": 0,
    "max_iters": None,
    "time_limit": None,
    "patience": None,
    "solver": "auto",
    "out": None,
    "checkpoint_every": 500,
    "threads": 1,
}


def load_run_config(path) -> dict:
    """Parse a flat ``key = value`` run configuration; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in RUN_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            dest, conv = RUN_KEYS[key]
            try:
                values[dest] = None if value.lower() in ("", "none") else conv(value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spreadcodes", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="two-stage block coordinate descent")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--max-active-cols", dest="max_active_cols", type=int)
    p.add_argument("--max-per-col", dest="max_per_col", type=int)
    p.add_argument("--init", help="random | gold | weil | file:PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int, help="per stage")
    p.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per stage")
    p.add_argument("--patience", type=int)
    p.add_argument("--solver", choices=["enum", "bnb", "auto"])
    p.add_argument("--out", help="checkpoint directory")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write a Gold, Weil or random family")
    p.add_argument("--family", required=True, choices=["gold", "weil", "random"])
    p.add_argument("--degree", type=int, help="gold: register degree d (n = 2^d - 1)")
    p.add_argument("--taps-u", dest="taps_u", help="gold: comma separated exponents, e.g. 7,3,0")
    p.add_argument("--taps-v", dest="taps_v")
    p.add_argument("--p", type=int, help="weil: prime code length")
    p.add_argument("--legendre-zero-bit", dest="legendre_zero_bit", type=int, default=0, choices=[0, 1])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acz-only", dest="acz_only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="correlation metrics of a family file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--dump-correlations", dest="dump", help="write i,j,k,value CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="block solve time versus number of active codes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--block-size", dest="block_size", type=int, required=True)
    p.add_argument("--active-cols-list", dest="active_cols", required=True)
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=["enum", "bnb", "auto"], default="auto")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated integers, got {text!r}") from None


def cmd_run(args) -> int:
    values = dict(RUN_DEFAULTS)
    if args.config:
        values.update(load_run_config(args.config))
    for key, (dest, _) in RUN_KEYS.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[dest] = flag
    n, m = values.get("n"), values.get("m")
    if n is None or m is None:
        raise UsageError("run: --n and --m are required")
    if n < 2 or m < 1:
        raise UsageError("run: need n >= 2 and m >= 1")
    init = values["init"]
    if init == "gold" and (n + 1) & n:
        raise UsageError(f"run: gold initialization needs n = 2^d - 1, got {n}")
    if init not in ("random", "gold", "weil") and not init.startswith("file:"):
        raise UsageError(f"run: unknown --init {init!r}")
    active = values["max_active_cols"]
    if active is None:
        active = min(values["block_size"], m)
    strategy = SelectionStrategy(values["block_size"], active, values["max_per_col"])
    max_iters = values["max_iters"]
    if max_iters is None and values["time_limit"] is None:
        max_iters = 10_000
    config = BcdConfig(
        strategy=strategy,
        seed=values["seed"],
        max_iterations=max_iters,
        time_limit=values["time_limit"],
        patience=values["patience"],
        solver=values["solver"],
        checkpoint_every=values["checkpoint_every"],
        out_dir=values["out"],
        threads=values["threads"],
    )
    try:
        strategy.validate(n, m)
        config.validate()
    except ValueError as exc:
        raise UsageError(f"run: {exc}") from None
    try:
        history = run(init, config, n, m)
    except (ValueError, FamilyFormatError, OSError) as exc:
        raise UsageError(f"run: {exc}") from None
    obj = history.objective
    print(f"stage_one_iterations={history.stage_one_iterations}")
    print(f"stage_two_iterations={history.stage_two_iterations}")
    print(f"feasible={str(history.feasible).lower()}")
    print(f"stop_reason={history.stop_reason}")
    print(f"isl={obj.isl}")
    print(f"mos={obj.mos:.6f}")
    print(f"sidelobe_mos={obj.sidelobe_mos:.6f}")
    return EXIT_OK if history.feasible else EXIT_INFEASIBLE


def cmd_generate(args) -> int:
    try:
        if args.family == "gold":
            if args.degree is None:
                raise UsageError("generate: gold needs --degree")
            taps_u = tuple(_int_list(args.taps_u)) if args.taps_u else None
            taps_v = tuple(_int_list(args.taps_v)) if args.taps_v else None
            family = gold_family(GoldSpec(args.degree, taps_u, taps_v))
        elif args.family == "weil":
            if args.p is None:
                raise UsageError("generate: weil needs --p")
            family = weil_family(WeilSpec(args.p, args.legendre_zero_bit))
        else:
            if args.n is None or args.m is None:
                raise UsageError("generate: random needs --n and --m")
            family = random_family(args.n, args.m, args.seed)
        if args.acz_only:
            family = acz_subset(family)
    except ValueError as exc:
        raise UsageError(f"generate: {exc}") from None
    save_family(family, args.out)
    print(f"wrote {family.m} codes of length {family.n} to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        family = load_family(args.infile)
    except (FamilyFormatError, OSError) as exc:
        raise UsageError(f"eval: {exc}") from None
    table = build_table(family)
    obj = table.objective()
    print(f"n={family.n}")
    print(f"m={family.m}")
    print(f"isl={obj.isl}")
    print(f"mos={obj.mos:.6f}")
    print(f"sidelobe_mos={obj.sidelobe_mos:.6f}")
    print(f"J={stage_one_objective(table)}")
    print(f"acz_count={acz_count(family)}")
    if args.dump:
        with open(args.dump, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "j", "k", "value"])
            for i in range(family.m):
                for j in range(i, family.m):
                    for k, v in enumerate(table.pair(i, j)):
                        writer.writerow([i, j, k, int(v)])
    return EXIT_OK


def bench_rows(n, m, block_size, active_cols, repeats, seed=0, solver="auto", threads=1):
    """Mean build/solve times of unconstrained random block problems per active-column count."""
    rows = []
    for c in active_cols:
        strategy = SelectionStrategy(block_size, c, math.ceil(block_size / c))
        strategy.validate(n, m)
        rng = np.random.default_rng([seed, c])
        build_t = solve_t = 0.0
        for _ in range(repeats):
            family = random_family(n, m, rng.integers(2**63))
            table = build_table(family)
            S = select_subset(rng, n, m, strategy)
            t0 = time.perf_counter()
            problem = build_partial(family, table, S, STAGE_TWO, enforce_acz=False)
            chosen = solver if solver != "auto" else ("enum" if len(S) <= 4 else "bnb")
            if chosen == "bnb":
                multilinear_form(problem)
            t1 = time.perf_counter()
            solve(problem, chosen, threads=threads)
            t2 = time.perf_counter()
            build_t += t1 - t0
            solve_t += t2 - t1
        rows.append(
            {
                "active_cols": c,
                "mean_build_s": build_t / repeats,
                "mean_solve_s": solve_t / repeats,
                "mean_total_s": (build_t + solve_t) / repeats,
                "repeats": repeats,
            }
        )
    return rows


def cmd_bench(args) -> int:
    cols = _int_list(args.active_cols)
    if not cols or any(c < 1 or c > args.m for c in cols):
        raise UsageError(f"bench: active column counts must lie in [1, {args.m}]")
    if args.repeats < 1 or args.block_size < 1 or args.n < 2:
        raise UsageError("bench: need --repeats >= 1, --block-size >= 1 and --n >= 2")
    try:
        rows = bench_rows(args.n, args.m, args.block_size, cols, args.repeats, args.seed, args.solver, args.threads)
    except ValueError as exc:
        raise UsageError(f"bench: {exc}") from None
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["active_cols", "mean_build_s", "mean_solve_s", "mean_total_s", "repeats"])
        for r in rows:
            writer.writerow(
                [r["active_cols"], f"{r['mean_build_s']:.6f}", f"{r['mean_solve_s']:.6f}",
                 f"{r['mean_total_s']:.6f}", r["repeats"]]
            )
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
