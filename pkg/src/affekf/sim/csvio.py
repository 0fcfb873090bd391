"""CSV persistence for Monte Carlo reports.

Formats are part of the external contract: UTF-8, LF line endings, '.'
decimal separator, 17 significant digits, headers exactly as written here.
"""
from __future__ import annotations

import os

import numpy as np

from .runner import MonteCarloReport

SUMMARY_HEADER = "variant,rmse_ori,rmse_pos,rmse_feat,nees_pose,nees_feat,time_s"
SERIES_HEADER = "step,rmse_ori,rmse_pos,nees_pose,nees_feat,err_ori,err_pos,bound3s_ori,bound3s_pos"
ENV_HEADER = "kind,index,x,y,z"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write(path: str, lines: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_csv(report: MonteCarloReport, out_dir: str) -> list:
    """Write summary.csv, one series_<variant>.csv per variant, and env.csv."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    lines = [SUMMARY_HEADER]
    for s in report.summaries:
        lines.append(
            ",".join(
                [s.variant]
                + [_fmt(v) for v in (s.rmse_ori, s.rmse_pos, s.rmse_feat, s.nees_pose, s.nees_feat, s.time_s)]
            )
        )
    path = os.path.join(out_dir, "summary.csv")
    _write(path, lines)
    written.append(path)

    for ser in report.series:
        lines = [SERIES_HEADER]
        for i in range(len(ser.rmse_ori)):
            lines.append(
                ",".join(
                    [str(i + 1)]
                    + [
                        _fmt(v)
                        for v in (
                            ser.rmse_ori[i],
                            ser.rmse_pos[i],
                            ser.nees_pose[i],
                            ser.nees_feat[i],
                            ser.err_ori[i],
                            ser.err_pos[i],
                            ser.bound_ori[i],
                            ser.bound_pos[i],
                        )
                    ]
                )
            )
        path = os.path.join(out_dir, f"series_{ser.variant}.csv")
        _write(path, lines)
        written.append(path)

    world = report.world
    lines = [ENV_HEADER]
    feats = np.asarray(world.features, dtype=float)
    for j, row in enumerate(feats):
        xyz = list(row) + [world.height] if row.size == 2 else list(row)
        lines.append(",".join(["feature", str(j)] + [_fmt(v) for v in xyz]))
    for i, p in enumerate(world.positions):
        lines.append(",".join(["robot", str(i)] + [_fmt(v) for v in p]))
    path = os.path.join(out_dir, "env.csv")
    _write(path, lines)
    written.append(path)
    return written
