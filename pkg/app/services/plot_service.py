"""
SVG plots for trials and batches
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

from ..core.geometry import Pose, ShipFootprint  # noqa: E402
from ..simulation.icefield import IceField  # noqa: E402
from .metrics_service import COL  # noqa: E402

logger = logging.getLogger(__name__)

PLANNER_COLORS = {
    "auto-icenav": "tab:blue",
    "lattice-only": "tab:cyan",
    "auto-icenav-straight-ws": "tab:purple",
    "straight": "tab:red",
    "skeleton": "tab:green",
}

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "icenav",
})


def _save(fig, path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path


def _draw_floes(ax, field_: IceField, **kwargs):
    polygons = [f.polygon.vertices for f in field_.floes]
    style = {"facecolor": "lightsteelblue", "edgecolor": "slategray", "linewidth": 0.3}
    style.update(kwargs)
    ax.add_collection(PolyCollection(polygons, **style))


def plot_impact_forces(summary: pd.DataFrame, path: str) -> str:
    """
    Box plots of per-trial mean and max impact force by planner, one column
    per concentration. summary holds one row per trial.
    """
    concentrations = sorted(summary["concentration"].unique())
    fig, axes = plt.subplots(2, len(concentrations), figsize=(3.2 * len(concentrations), 5.0),
                             squeeze=False, sharey="row")
    for j, conc in enumerate(concentrations):
        subset = summary[summary["concentration"] == conc]
        planners = sorted(subset["planner"].unique())
        for i, column in enumerate(("mean_impact_force", "max_impact_force")):
            ax = axes[i, j]
            data = [subset.loc[subset["planner"] == p, column].to_numpy() / 1e3 for p in planners]
            boxes = ax.boxplot(data, patch_artist=True, widths=0.6)
            ax.set_xticks(range(1, len(planners) + 1), planners, rotation=30, ha="right")
            for patch, p in zip(boxes["boxes"], planners):
                patch.set_facecolor(PLANNER_COLORS.get(p, "lightgray"))
                patch.set_alpha(0.6)
            if j == 0:
                ax.set_ylabel(f"{column.split('_')[0]} impact force (kN)")
            if i == 0:
                ax.set_title(f"{conc:.0%} concentration")
    return _save(fig, path)


def plot_trajectories(field_: IceField, trajectories: Mapping[str, np.ndarray], path: str,
                      footprint: Optional[ShipFootprint] = None) -> str:
    """Ship paths of several planners over the initial floe placements"""
    aspect = field_.channel_width / max(field_.channel_length, 1.0)
    fig, ax = plt.subplots(figsize=(10.0, max(2.0, 10.0 * aspect + 0.8)))
    _draw_floes(ax, field_)
    for planner, trajectory in trajectories.items():
        if len(trajectory) == 0:
            continue
        ax.plot(trajectory[:, COL["x"]], trajectory[:, COL["y"]], lw=1.2,
                color=PLANNER_COLORS.get(planner, None), label=planner)
        if footprint is not None:
            last = trajectory[-1]
            outline = footprint.world_vertices(Pose(last[COL["x"]], last[COL["y"]], last[COL["psi"]]))
            ax.fill(outline[:, 0], outline[:, 1], color=PLANNER_COLORS.get(planner, "k"), alpha=0.4)
    ax.set_xlim(min(0.0, min((t[:, COL["x"]].min() for t in trajectories.values() if len(t)), default=0.0)),
                field_.channel_length)
    ax.set_ylim(0.0, field_.channel_width)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right", fontsize=7, frameon=False)
    return _save(fig, path)


def plot_hull_impacts(events: Sequence, footprint: ShipFootprint, path: str) -> str:
    """Contact points on the ship outline, coloured by impact force"""
    fig, ax = plt.subplots(figsize=(6.0, 3.0))
    outline = np.vstack([footprint.outline.vertices, footprint.outline.vertices[:1]])
    ax.plot(outline[:, 0], outline[:, 1], color="k", lw=1.0)
    if events:
        points = np.array([e.point for e in events])
        forces = np.array([e.impact_force for e in events]) / 1e3
        order = np.argsort(forces)
        scatter = ax.scatter(points[order, 0], points[order, 1], c=forces[order], s=10, cmap="viridis")
        fig.colorbar(scatter, ax=ax, label="impact force (kN)")
    ax.set_aspect("equal")
    ax.set_xlabel("body x (m)")
    ax.set_ylabel("body y (m)")
    return _save(fig, path)


def plot_plan_snapshot(plan, field_: IceField, path: str) -> str:
    """Costmap with the stage-1 path and the followed path of one planning iteration"""
    fig, ax = plt.subplots(figsize=(10.0, 10.0 * field_.channel_width / max(field_.channel_length, 1.0) + 0.8))
    if plan.costmap is not None:
        grid = plan.costmap.grid
        extent = (grid.origin.x, grid.x_max, grid.origin.y, grid.y_max)
        image = ax.imshow(plan.costmap.cost, origin="lower", extent=extent, cmap="Greys", interpolation="nearest")
        fig.colorbar(image, ax=ax, label="collision cost", shrink=0.6)
    else:
        _draw_floes(ax, field_)
    if plan.stage1_path is not None:
        ax.plot(plan.stage1_path.poses[:, 0], plan.stage1_path.poses[:, 1], "--", color="tab:orange",
                lw=1.0, label="stage 1")
    ax.plot(plan.path.poses[:, 0], plan.path.poses[:, 1], color="tab:blue", lw=1.2, label="followed")
    ax.axvline(plan.subgoal, color="tab:red", lw=0.8, ls=":")
    ax.set_xlim(0.0, field_.channel_length)
    ax.set_ylim(0.0, field_.channel_width)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7, frameon=False)
    return _save(fig, path)


def plot_batch(per_trial: pd.DataFrame, out_dir: str, fields: Optional[Dict[int, IceField]] = None,
               trajectories: Optional[Dict[int, Dict[str, np.ndarray]]] = None) -> Sequence[str]:
    """All batch plots; trajectory plots only for fields whose trajectories are provided"""
    written = []
    if len(per_trial):
        written.append(plot_impact_forces(per_trial, str(Path(out_dir) / "impact_forces.svg")))
    for seed, by_planner in sorted((trajectories or {}).items()):
        if fields and seed in fields:
            written.append(plot_trajectories(fields[seed], by_planner,
                                             str(Path(out_dir) / f"trajectories_{seed}.svg")))
    return written
