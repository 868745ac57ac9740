from __future__ import annotations

import json
from pathlib import Path
from typing import Any

_METRIC_ROWS = (
    ("depth_mse_median", "Depth Error (median sq., m^2)"),
    ("chamfer", "Chamfer Distance (m)"),
    ("intensity_rmse", "Intensity RMSE"),
    ("raydrop_accuracy", "Ray-drop Accuracy"),
)


def write_json_report(report: dict[str, Any], output_path: Path) -> None:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_markdown_report(report: dict[str, Any], output_path: Path) -> None:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(_bench_to_markdown(report), encoding="utf-8")


def format_metrics_table(metrics: dict[str, float]) -> str:
    lines = [f"{'Metric':<32} {'Value':>12}", f"{'-' * 32} {'-' * 12}"]
    for key, label in _METRIC_ROWS:
        value = metrics.get(key)
        lines.append(f"{label:<32} {'-' if value is None else f'{value:.6f}':>12}")
    return "\n".join(lines)


def _bench_to_markdown(report: dict[str, Any]) -> str:
    machine = report["machine"]

    lines: list[str] = []
    lines.append("# lidar-evs Benchmark Report")
    lines.append("")
    lines.append(f"- Generated (UTC): `{report['generated_at_utc']}`")
    lines.append(f"- Python: `{machine['python']}` / numpy `{machine['numpy']}` / scipy `{machine['scipy']}`")
    lines.append(f"- Platform: `{machine['platform']}` ({machine['processor'] or 'unknown CPU'}, {machine['cpu_count']} cores)")
    lines.append(f"- Threads: `{report['threads']}`")
    lines.append("")

    lines.append("## Stages")
    lines.append("")
    lines.append("| Stage | Scene Points | Processed | Seconds | Points/s |")
    lines.append("|---|---:|---:|---:|---:|")
    for row in report["stages"]:
        rate = row["points_per_second"]
        lines.append(
            f"| {row['stage']} | {row['scene_points']} | {row['processed']} | "
            f"{row['seconds']:.4f} | {'-' if rate is None else f'{rate:,.0f}'} |"
        )
    if not report["stages"]:
        lines.append("| - | 0 | 0 | - | - |")
    lines.append("")

    if report["skipped"]:
        lines.append("## Skipped Stages")
        lines.append("")
        lines.append("| Stage | Scene Points | Reason |")
        lines.append("|---|---:|---|")
        for item in report["skipped"]:
            lines.append(f"| {item['stage']} | {item['scene_points']} | {item['reason']} |")
        lines.append("")

    lines.append("## Full Data")
    lines.append("")
    lines.append("- Full machine-readable data is available in the JSON artifact.")
    return "\n".join(lines) + "\n"
