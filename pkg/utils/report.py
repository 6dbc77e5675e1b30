import logging
from pathlib import Path
from typing import Iterable

import pandas as pd

logger = logging.getLogger(__name__)

CSV_OPTIONS = {"index": False, "lineterminator": "\n", "float_format": "%.10g", "encoding": "utf-8"}

# Column schemas of the emitted files
RUN_COLUMNS = ["iteration", "t_max", "greedy_t_max", "reward", "qgate_rate"]
SUMMARY_COLUMNS = [
    "seed", "algorithm", "converged", "iterations_to_converge", "final_t_max", "best_t_max", "mean_mu",
    "served_fraction",
]
VERIFY_COLUMNS = ["scenario_id", "equation", "branch", "formula", "direct", "relative_error", "tolerance", "passed"]


def run_frame(metrics) -> pd.DataFrame:
    """Per-iteration series of one run"""
    return pd.DataFrame(
        {
            "iteration": range(len(metrics.t_max)),
            "t_max": metrics.t_max,
            "greedy_t_max": metrics.greedy_t_max,
            "reward": metrics.reward,
            "qgate_rate": metrics.qgate_rate,
        },
        columns=RUN_COLUMNS,
    )


def summary_frame(runs: Iterable, budget: int) -> pd.DataFrame:
    return pd.DataFrame([m.summary(budget) for m in runs], columns=SUMMARY_COLUMNS)


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, **CSV_OPTIONS)
    return path


def write_gnuplot(df: pd.DataFrame, path: str | Path, x: str = "value", group: str = "algorithm") -> Path:
    """Whitespace-separated blocks, one per group, separated by two blank lines (gnuplot `index`)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [c for c in df.columns if c not in (group, "axis")]
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for i, (name, block) in enumerate(df.groupby(group, sort=False)):
            if i:
                f.write("\n\n")
            f.write(f"# {group}={name}\n# " + " ".join(columns) + "\n")
            block[columns].sort_values(x).to_csv(
                f, sep=" ", header=False, index=False, lineterminator="\n", float_format="%.10g"
            )
    return path


def emit_report(tables: dict[str, pd.DataFrame], out_dir: str | Path, gnuplot: bool = False) -> list[Path]:
    """Write one CSV per table, plus a .dat file when gnuplot is set"""
    out_dir = Path(out_dir)
    paths = []
    for name, df in tables.items():
        paths.append(write_csv(df, out_dir / f"{name}.csv"))
        if gnuplot and "value" in df.columns and "algorithm" in df.columns:
            paths.append(write_gnuplot(df, out_dir / f"{name}.dat"))
    logger.info(f"Wrote {len(paths)} report files to {out_dir}")
    return paths
