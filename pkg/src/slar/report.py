"""Artifact emission: delimited trajectories, weight tables, JSON summaries,
and the figures rendered next to them.

Every file is a pure function of its inputs: floats are written with 17
significant digits, figures carry no timestamps, and SVG ids are salted with
a fixed string, so re-running a configuration reproduces artifacts byte for
byte.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

from slar.game import Trajectory  # noqa: E402
from slar.model import Weights  # noqa: E402

plt.rcParams["svg.hashsalt"] = "slar"

TRAJECTORY_HEADER = "t,delta_w_norm,w_norm,nonrobust_mass,std_acc_train,std_acc_test,robust_acc_test,objective"


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(traj: Trajectory, path, snapshot_dir=None) -> None:
    """One row per round; optional per-round weight snapshots as sidecars."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for r in traj.records:
            fh.write(",".join([
                str(r.t), fmt(r.delta_w_norm), fmt(r.w_norm), fmt(r.nonrobust_mass),
                fmt(r.std_acc_train), fmt(r.std_acc_test), fmt(r.robust_acc_test),
                fmt(r.objective),
            ]) + "\n")
    if snapshot_dir is not None:
        os.makedirs(snapshot_dir, exist_ok=True)
        for r in traj.records:
            snap = os.path.join(snapshot_dir, f"w_t{r.t}.csv")
            with open(snap, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("index,w\n")
                for j, wj in enumerate(r.w):
                    fh.write(f"{j},{fmt(wj)}\n")


def write_weights_table_csv(weights: Weights, mu: np.ndarray, nonrobust: np.ndarray, path) -> None:
    """Per-feature table: index, mean, robustness flag, learned weight."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,mu_i,is_robust,w_i\n")
        for j in range(weights.dim):
            fh.write(f"{j},{fmt(float(mu[j]))},{int(not nonrobust[j])},{fmt(float(weights.w[j]))}\n")


def _tail(values: list[float]) -> list[float]:
    return values[len(values) // 2:]


def summary_entry(traj: Trajectory, condition_report: dict | None) -> dict:
    """Stable per-method summary block."""
    last = traj.records[-1]
    deltas = [r.delta_w_norm for r in traj.records]
    tail = _tail(deltas)
    return {
        "method": traj.method,
        "std_acc_train": last.std_acc_train,
        "std_acc_test": last.std_acc_test,
        "robust_acc_test": last.robust_acc_test,
        "nonrobust_mass": last.nonrobust_mass,
        "deltaw_mean_tail": float(np.mean(tail)),
        "deltaw_min_tail": float(np.min(tail)),
        "condition_report": condition_report,
    }


def _render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return fmt(x)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(f'{pad}  "{k}": {_render_json(v, indent + 1)}' for k, v in obj.items())
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(f"{pad}  {_render_json(v, indent + 1)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    """JSON with 17-significant-digit floats and no non-standard tokens."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_render_json(obj) + "\n")


_STYLE = {"at": dict(color="tab:red"), "oat": dict(color="tab:blue"),
          "standard": dict(color="tab:gray"), "ne": dict(color="tab:green")}


def _save(fig, path) -> None:
    fig.savefig(path, metadata={"Date": None}, format="svg")
    plt.close(fig)


def render_deltaw_figure(trajs: list[Trajectory], path) -> None:
    """Per-round weight movement, the stability picture."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for traj in trajs:
        ts = [r.t for r in traj.records]
        ys = [r.delta_w_norm for r in traj.records]
        ax.plot(ts, ys, marker="o" if len(ts) < 5 else None, markersize=3,
                label=traj.method.upper(), **_STYLE.get(traj.method, {}))
    ax.set_xlabel("round t")
    ax.set_ylabel(r"$\|w^{(t)} - w^{(t-1)}\|_2$")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def render_acc_figure(trajs: list[Trajectory], path) -> None:
    """Standard and certified robust test accuracy per round."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.6), sharey=True)
    for traj in trajs:
        ts = [r.t for r in traj.records]
        style = _STYLE.get(traj.method, {})
        axes[0].plot(ts, [r.std_acc_test for r in traj.records],
                     marker="o" if len(ts) < 5 else None, markersize=3,
                     label=traj.method.upper(), **style)
        axes[1].plot(ts, [r.robust_acc_test for r in traj.records],
                     marker="o" if len(ts) < 5 else None, markersize=3,
                     label=traj.method.upper(), **style)
    axes[0].set_title("standard accuracy")
    axes[1].set_title("certified robust accuracy")
    for ax in axes:
        ax.set_xlabel("round t")
        ax.set_ylim(-0.05, 1.05)
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("accuracy")
    axes[0].legend()
    fig.tight_layout()
    _save(fig, path)


def render_weights_figure(trajs: list[Trajectory], nonrobust: np.ndarray, path) -> None:
    """Final weights on the non-robust coordinates, per method."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    idx = np.flatnonzero(nonrobust)
    for traj in trajs:
        w = traj.records[-1].w
        ax.plot(idx, w[idx], ".", markersize=2.5, alpha=0.65,
                label=traj.method.upper(), **_STYLE.get(traj.method, {}))
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("non-robust feature index")
    ax.set_ylabel("final weight")
    ax.legend(markerscale=4)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
