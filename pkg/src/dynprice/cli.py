# -*- coding: utf-8 -*-
"""
dynprice command line.

    dynprice run-case scenario.yaml --case 6 --seed 7 --baseline
    dynprice compare scenario.yaml --cases 1,3,5,6
    dynprice fit-cnone data.csv --lambda 1.0 --pool 100
    dynprice gen-history scenario.yaml --days 90 --seed 7
    dynprice storage-study scenario.yaml

Without a scenario argument the $DYNPRICE_CONFIG file, then the bundled
default, is used.

Exit codes: 0 success, 1 bad input or usage, 2 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from dynprice.cnone import check_constraints, fit_aggregate_demand, save_model
from dynprice.errors import DynPriceError, InputError, SolverError, StageError
from dynprice.methods.evaluate_utils import compare_table, profit_inversions, save_case_result, save_table
from dynprice.scenario import (
    generate_cnone_history,
    generate_csm_history,
    ingest_price_demand_csv,
    load_config,
    run_case,
    run_days,
    storage_study,
    write_csm_history,
)

logger = logging.getLogger("dynprice")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_INPUT instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_cases(text: str) -> list[int]:
    """'1-3,6' -> [1, 2, 3, 6]"""
    cases = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                cases.extend(range(lo, hi + 1))
            else:
                cases.append(int(part))
        except ValueError:
            raise InputError(f"cannot read case list '{text}'") from None
    if not cases:
        raise InputError("no cases selected")
    return cases


def _flags() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default="out")
    common.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--no-progress", action="store_true", help="hide progress bars")
    common.add_argument("--jobs", type=int, default=None,
                        help="fitness evaluation threads (default: all cores)")
    return common


def build_parser() -> argparse.ArgumentParser:
    flags = _flags()
    positional = argparse.ArgumentParser(add_help=False)
    positional.add_argument("config", nargs="?", default=None,
                            help="scenario YAML (default: $DYNPRICE_CONFIG or the bundled scenario)")
    common = [positional, flags]
    parser = _Parser(prog="dynprice", description="Day-ahead dynamic pricing for an electricity retailer.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run-case", parents=common, help="optimise prices for one customer mix")
    p.add_argument("--case", type=int, default=None)
    p.add_argument("--baseline", action="store_true", help="also run the iterative baseline")
    p.add_argument("--days", type=int, default=1,
                   help="consecutive days with model updates between them")

    p = sub.add_parser("compare", parents=common, help="GA vs baseline over several cases")
    p.add_argument("--cases", type=str, default="1-10")

    p = sub.add_parser("fit-cnone", parents=[flags], help="fit the aggregate demand model from an hourly csv")
    p.add_argument("history", nargs="?", default=None,
                   help="csv with date, slot, price_cents, demand_kwh (default: synthesised)")
    p.add_argument("--config", dest="config", default=None)
    p.add_argument("--pool", type=int, default=None, help="households in the pool (default: customers)")
    p.add_argument("--lambda", dest="forgetting", type=float, default=None, help="forgetting factor in [0, 1]")

    p = sub.add_parser("gen-history", parents=common, help="write synthetic C-SM and C-NONE histories")
    p.add_argument("--days", type=int, default=None)

    sub.add_parser("storage-study", parents=common, help="no storage vs storage with and without sell-back")
    return parser


def _run_case(args, config) -> None:
    progress = not args.no_progress
    if args.days > 1:
        run = run_days(config, args.case, args.days, seed=args.seed, progress=progress, workers=args.jobs)
        for day, result in enumerate(run.results, start=1):
            save_case_result(result, os.path.join(args.out, str(result.case), f"day{day}"))
        return
    result = run_case(config, args.case, seed=args.seed, run_baseline=args.baseline,
                      progress=progress, workers=args.jobs)
    save_case_result(result, os.path.join(args.out, str(result.case)))
    print(f"case {result.case}: profit {result.profit:.2f} cents, revenue {result.revenue:.2f}, "
          f"violation {result.violation:.4g}")


def _compare(args, config) -> None:
    results = []
    for case in parse_cases(args.cases):
        result = run_case(config, case, seed=args.seed, run_baseline=True,
                          progress=not args.no_progress, workers=args.jobs)
        save_case_result(result, os.path.join(args.out, str(case)))
        results.append(result)
    table = compare_table(results)
    save_table(table, os.path.join(args.out, "compare.csv"))
    for message in profit_inversions(table):
        logger.warning(message)
    print(table.to_string(index=False))


def _fit_cnone(args, config) -> None:
    pool = args.pool or config.customers
    forgetting = config.cnone.forgetting if args.forgetting is None else args.forgetting
    source = args.history or config.cnone.history_csv
    if source is None:
        seed = config.seed if args.seed is None else args.seed
        source = generate_cnone_history(pool, config.cnone.history_days, seed,
                                        p_min=config.market.p_min, p_max=config.market.p_max)
    history = ingest_price_demand_csv(source, pool, forgetting)
    model = fit_aggregate_demand(history, tol=config.cnone.tol, max_iter=config.cnone.max_iter)
    path = save_model(model, os.path.join(args.out, "cnone_model.json"))
    logger.info("[Saved] C-NONE model -> %s", path)
    print(f"fitted {history.days} days, max constraint violation {check_constraints(model):.3g}")


def _gen_history(args, config) -> None:
    seed = config.seed if args.seed is None else args.seed
    frames = generate_csm_history(config.household(storage=False), args.days or config.csm.history_days, seed,
                                  config.csm.w_max, config.csm.noise, config.market.p_min,
                                  config.market.p_max, progress=not args.no_progress)
    write_csm_history(frames, args.out)
    path = os.path.join(args.out, "cnone_history.csv")
    os.makedirs(args.out, exist_ok=True)
    generate_cnone_history(config.customers, args.days or config.cnone.history_days, seed,
                           p_min=config.market.p_min, p_max=config.market.p_max).to_csv(path, index=False)
    logger.info("[Saved] C-NONE history -> %s", path)


def _storage_study(args, config) -> None:
    table = storage_study(config, seed=args.seed, progress=not args.no_progress, workers=args.jobs)
    save_table(table, os.path.join(args.out, "storage_study.csv"))
    print(table.to_string(index=False))


COMMANDS = {
    "run-case": _run_case,
    "compare": _compare,
    "fit-cnone": _fit_cnone,
    "gen-history": _gen_history,
    "storage-study": _storage_study,
}


def exit_code(error: BaseException) -> int:
    cause = error.cause if isinstance(error, StageError) else error
    if isinstance(cause, SolverError):
        return EXIT_SOLVER
    return EXIT_INPUT


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_INPUT

    logging.basicConfig(level=getattr(logging, args.log_level), format="[%(levelname)s] %(message)s")
    try:
        config = load_config(args.config)
        COMMANDS[args.command](args, config)
    except DynPriceError as e:
        logger.error("%s", e)
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
