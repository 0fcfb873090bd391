"""Render report figures from a simulation CSV bundle.

A bundle directory holds summary.csv, one series_<variant>.csv per variant
and env.csv, with fixed headers. Rendering is read-only and emits four PNG
files: NEES with the consistency reference at 1, RMSE curves, error curves
with 3-sigma envelopes, and an environment overview.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SUMMARY_COLUMNS = ["variant", "rmse_ori", "rmse_pos", "rmse_feat", "nees_pose", "nees_feat", "time_s"]
SERIES_COLUMNS = [
    "step",
    "rmse_ori",
    "rmse_pos",
    "nees_pose",
    "nees_feat",
    "err_ori",
    "err_pos",
    "bound3s_ori",
    "bound3s_pos",
]
ENV_COLUMNS = ["kind", "index", "x", "y", "z"]

FIGURES = ("nees_pose.png", "rmse.png", "err_3sigma.png", "env.png")


class MissingFileError(FileNotFoundError):
    """A required bundle file does not exist."""


class MalformedCsvError(ValueError):
    """A bundle file does not follow the CSV contract; names the column."""


@dataclass(frozen=True)
class ReportBundle:
    """Directory containing summary.csv, series_*.csv and env.csv."""

    directory: str

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)


def _read_table(path: str, columns: list) -> dict:
    if not os.path.isfile(path):
        raise MissingFileError(f"missing bundle file: {os.path.basename(path)}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsvError(f"{os.path.basename(path)}: empty file") from None
        if header != columns:
            missing = [c for c in columns if c not in header]
            name = missing[0] if missing else header[0]
            raise MalformedCsvError(f"{os.path.basename(path)}: bad header, column {name!r}")
        rows = list(reader)
    out = {c: [] for c in columns}
    for row in rows:
        if len(row) != len(columns):
            raise MalformedCsvError(f"{os.path.basename(path)}: row with {len(row)} fields")
        for c, value in zip(columns, row):
            out[c].append(value)
    return out


def _floats(table: dict, column: str, path: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in table[column]])
    except ValueError as exc:
        raise MalformedCsvError(f"{os.path.basename(path)}: column {column!r} not numeric") from exc


def load_bundle(bundle: ReportBundle) -> tuple:
    summary = _read_table(bundle.path("summary.csv"), SUMMARY_COLUMNS)
    variants = summary["variant"]
    series = {}
    for v in variants:
        path = bundle.path(f"series_{v}.csv")
        table = _read_table(path, SERIES_COLUMNS)
        series[v] = {c: _floats(table, c, path) for c in SERIES_COLUMNS}
    env_path = bundle.path("env.csv")
    env_table = _read_table(env_path, ENV_COLUMNS)
    env = {
        "kind": env_table["kind"],
        "x": _floats(env_table, "x", env_path),
        "y": _floats(env_table, "y", env_path),
        "z": _floats(env_table, "z", env_path),
    }
    return variants, series, env


def _colors(variants: list) -> dict:
    cmap = plt.get_cmap("tab10")
    return {v: cmap(i % 10) for i, v in enumerate(variants)}


def render_report(bundle: ReportBundle, out_dir: str) -> list:
    """Emit the four report figures; returns the list of written paths."""
    variants, series, env = load_bundle(bundle)
    os.makedirs(out_dir, exist_ok=True)
    colors = _colors(variants)
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for v in variants:
        ax.plot(series[v]["step"], series[v]["nees_pose"], label=v, color=colors[v])
    ax.axhline(1.0, color="black", linestyle="--", linewidth=1, label="consistent (1)")
    ax.set_xlabel("step")
    ax.set_ylabel("pose NEES")
    ax.set_title("Pose NEES over the trajectory")
    ax.legend()
    path = os.path.join(out_dir, "nees_pose.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for v in variants:
        axes[0].plot(series[v]["step"], series[v]["rmse_ori"], label=v, color=colors[v])
        axes[1].plot(series[v]["step"], series[v]["rmse_pos"], label=v, color=colors[v])
    axes[0].set_ylabel("orientation RMSE (rad)")
    axes[1].set_ylabel("position RMSE (m)")
    axes[1].set_xlabel("step")
    axes[0].set_title("RMSE over the trajectory")
    axes[0].legend()
    path = os.path.join(out_dir, "rmse.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, max(len(variants), 1), figsize=(4 * max(len(variants), 1), 6),
                             sharex=True, squeeze=False)
    for col, v in enumerate(variants):
        s = series[v]
        for row, kind in enumerate(("ori", "pos")):
            ax = axes[row][col]
            ax.plot(s["step"], s[f"err_{kind}"], color=colors[v], label=v)
            ax.plot(s["step"], s[f"bound3s_{kind}"], color="gray", linestyle=":")
            ax.plot(s["step"], -s[f"bound3s_{kind}"], color="gray", linestyle=":")
            if row == 0:
                ax.set_title(v)
        axes[1][col].set_xlabel("step")
    axes[0][0].set_ylabel("orientation error (rad)")
    axes[1][0].set_ylabel("position error (m)")
    fig.suptitle("Single-run errors with 3-sigma envelopes")
    path = os.path.join(out_dir, "err_3sigma.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 6))
    kinds = np.array(env["kind"])
    robot = kinds == "robot"
    feat = kinds == "feature"
    ax.plot(env["x"][robot], env["y"][robot], color="tab:blue", linewidth=1, label="trajectory")
    ax.scatter(env["x"][feat], env["y"][feat], color="tab:red", marker="*", s=60, label="features")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title("Environment")
    ax.legend()
    path = os.path.join(out_dir, "env.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)
    return written
