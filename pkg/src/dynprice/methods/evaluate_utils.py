# evaluate_utils.py
import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# all-C-HEMS >= all-C-SM >= all-C-NONE on the bundled case table
PROFIT_ORDER = (("all C-HEMS", 5), ("all C-SM", 3), ("all C-NONE", 1))


def _slot_frame(values: dict, horizon: int) -> pd.DataFrame:
    frame = pd.DataFrame({"slot": np.arange(horizon)})
    for name, column in values.items():
        frame[name] = np.asarray(column, dtype=float)
    return frame


def save_case_result(result, out_dir):
    """
    Write one case run under `out_dir`:

    - result.json: summary (revenue, cost, profit, violation, seconds, prices)

    - trace.csv: generation, best_profit, mean_profit, feasible_fraction

    - prices.csv / demand.csv: per-slot series for plotting

    - baseline.csv: round-by-round log, only when the baseline was run
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    paths["result"] = os.path.join(out_dir, "result.json")
    with open(paths["result"], "w", encoding="utf-8") as f:
        json.dump(result.as_dict(), f, ensure_ascii=False, indent=2)

    paths["trace"] = os.path.join(out_dir, "trace.csv")
    pd.DataFrame(result.trace, columns=["generation", "best_profit", "mean_profit", "feasible_fraction"]) \
        .to_csv(paths["trace"], index=False)

    horizon = len(result.prices)
    paths["prices"] = os.path.join(out_dir, "prices.csv")
    _slot_frame({"price_cents": result.prices}, horizon).to_csv(paths["prices"], index=False)

    paths["demand"] = os.path.join(out_dir, "demand.csv")
    _slot_frame(result.demand, horizon).to_csv(paths["demand"], index=False)

    if result.baseline is not None:
        paths["baseline"] = os.path.join(out_dir, "baseline.csv")
        pd.DataFrame(result.baseline.trace).to_csv(paths["baseline"], index=False)

    for name, path in paths.items():
        logger.info("[Saved] %s -> %s", name, path)
    return paths


def read_slot_csv(path) -> pd.DataFrame:
    """Per-slot csv written by save_case_result, floats parsed back bit for bit."""
    return pd.read_csv(path, float_precision="round_trip").sort_values("slot").reset_index(drop=True)


def compare_table(results) -> pd.DataFrame:
    """GA vs baseline, one row per case."""
    rows = []
    for r in results:
        rows.append({
            "case": r.case,
            "hems": r.counts.hems,
            "sm": r.counts.sm,
            "none": r.counts.none,
            "ga_revenue": r.revenue,
            "ga_cost": r.cost,
            "ga_profit": r.profit,
            "ga_violation": r.violation,
            "baseline_revenue": r.baseline.evaluation.revenue if r.baseline else np.nan,
            "baseline_cost": r.baseline.evaluation.cost if r.baseline else np.nan,
            "baseline_profit": r.baseline.evaluation.profit if r.baseline else np.nan,
            "baseline_violation": r.baseline.evaluation.violation if r.baseline else np.nan,
            "ga_seconds": r.seconds,
        })
    return pd.DataFrame(rows)


def profit_inversions(table: pd.DataFrame) -> list[str]:
    """Messages for every break in the all-C-HEMS >= all-C-SM >= all-C-NONE profit ordering."""
    profits = {}
    for label, case in PROFIT_ORDER:
        match = table.loc[table["case"] == case, "ga_profit"]
        if not match.empty:
            profits[label] = float(match.iloc[0])
    labels = [label for label, _ in PROFIT_ORDER if label in profits]
    messages = []
    for hi, lo in zip(labels, labels[1:]):
        if profits[hi] < profits[lo]:
            messages.append(f"profit inversion: {hi} {profits[hi]:.2f} < {lo} {profits[lo]:.2f}")
    return messages


def save_table(table: pd.DataFrame, path) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    table.to_csv(path, encoding="utf-8", index=False)
    logger.info("[Saved] CSV report -> %s", path)
    return path
