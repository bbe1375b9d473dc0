"""Run-report assembly and atomic JSON persistence.

Reports are deterministic for a fixed (config, seed): everything that can
vary between identical runs (timestamps, wall clock) lives under the single
top-level "timing" key, so two reports from identical runs are byte-identical
after dropping it.
"""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

SCHEMA_VERSION = 1


def build_report(config_dict: dict, dataset_info: dict, result: dict) -> dict:
    timing = dict(result.get("timing", {}))
    timing["created_at"] = datetime.now(timezone.utc).isoformat()
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "config": config_dict,
        "dataset": dataset_info,
        "method": result["method"],
        "seeds": result["seeds"],
        "eval_graph_policy": result["eval_graph_policy"],
        "per_seed": result["per_seed"],
        "aggregate": result["aggregate"],
        "timing": timing,
    }


def build_comparison_report(config_dict: dict, dataset_info: dict,
                            rows: list[dict], total_seconds: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "ablation",
        "config": config_dict,
        "dataset": dataset_info,
        "rows": rows,
        "timing": {
            "created_at": datetime.now(timezone.utc).isoformat(),
            "total_seconds": total_seconds,
        },
    }


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report_json(report: dict, path) -> None:
    """Serialize atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = report_to_json(report)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_summary_table(rows: list[dict]) -> str:
    """Plain-text PM/FM table printed after a run."""
    header = f"{'method':<18} {'PM':>8} {'±':>6} {'FM':>8} {'±':>6}"
    lines = [header, "-" * len(header)]
    for row in rows:
        agg = row["aggregate"]
        fm_mean = agg["fm_mean"]
        fm_std = agg["fm_std"]
        lines.append(
            f"{row.get('label', row['method']):<18} "
            f"{agg['pm_mean']:>8.2f} {agg['pm_std']:>6.2f} "
            + (f"{fm_mean:>8.2f} {fm_std:>6.2f}" if fm_mean is not None
               else f"{'-':>8} {'-':>6}")
        )
    return "\n".join(lines)
