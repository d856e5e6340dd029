"""Render run artifacts to image files: scene views, metric timelines, sweeps.

Color vocabulary matches the console: spawn areas blue, goals green, markers
small black dots, areas of effect green outlines, ring goals blue circles.
"""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Polygon as MplPolygon, Rectangle

from .dynamics import Mode, Tag
from .engine import SimState
from .scenario import ScenarioConfig

AGENT_COLORS = {
    (Tag.NONE, Mode.ATTRACT): "#7f8c9b",
    (Tag.NONE, Mode.REPEL): "#7f8c9b",
    (Tag.OPENER, Mode.REPEL): "#e8a33d",
    (Tag.OPENER, Mode.ATTRACT): "#e8a33d",
    (Tag.PARTICIPANT, Mode.ATTRACT): "#d64550",
    (Tag.PARTICIPANT, Mode.REPEL): "#8e44ad",
}


def scene_figure(config: ScenarioConfig, state: SimState | None = None, show_markers: bool = True):
    """Top-down view of the world, optionally with live agent state."""
    fig, ax = plt.subplots(figsize=(7, 7 * config.bounds.height / max(config.bounds.width, 1e-9)))
    b = config.bounds
    ax.add_patch(Rectangle((b.xmin, b.ymin), b.width, b.height, fill=False, edgecolor="#444444"))

    for area in config.spawn_areas:
        r = area.region
        ax.add_patch(
            Rectangle((r.xmin, r.ymin), r.width, r.height, facecolor="#3b6fd4", alpha=0.15, edgecolor="#3b6fd4")
        )
    for poly in config.obstacles:
        ax.add_patch(MplPolygon([list(p) for p in poly], facecolor="#555555", edgecolor="#333333"))
    ring_names = {g for aoe in config.areas_of_effect for g in aoe.ring_goals}
    for name, pos in config.goals.items():
        if name in ring_names:
            ax.plot(pos[0], pos[1], "o", color="#3b6fd4", markersize=5, markerfacecolor="none")
        else:
            ax.plot(pos[0], pos[1], "s", color="#2e9e4f", markersize=4)
    for aoe in config.areas_of_effect:
        ax.add_patch(Circle(aoe.center, aoe.radius, fill=False, edgecolor="#2e9e4f", linestyle="--"))

    if state is not None:
        if show_markers and len(state.field):
            xy = state.field.positions
            ax.plot(xy[:, 0], xy[:, 1], ".", color="#111111", markersize=1, alpha=0.4)
        groups = defaultdict(list)
        for agent in state.agents:
            groups[AGENT_COLORS[(agent.tag, agent.mode)]].append(agent.position)
        for color, pts in groups.items():
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", color=color, markersize=3)
        ax.set_title(f"t = {state.sim_time:.2f} s, {len(state.agents)} agents")
    elif show_markers:
        ax.set_title("scene layout")

    ax.set_xlim(b.xmin - 1, b.xmax + 1)
    ax.set_ylim(b.ymin - 1, b.ymax + 1)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    return fig


def save_scene(path: str, config: ScenarioConfig, state: SimState | None = None, show_markers: bool = True) -> None:
    fig = scene_figure(config, state, show_markers)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_metrics_timeline(path: str, history: dict[str, list]) -> None:
    """Open-space radius, live count and min pairwise distance over time."""
    time = history.get("time", [])
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)

    for key, values in sorted(history.items()):
        if key.startswith("open_space_"):
            axes[0].plot(time, [v if v is not None else math.nan for v in values], label=key[len("open_space_"):])
    axes[0].set_ylabel("open space [m]")
    if axes[0].lines:
        axes[0].legend(loc="upper left", fontsize=8)

    axes[1].plot(time, history.get("live", []), color="#3b6fd4")
    axes[1].set_ylabel("live agents")

    mp = [v if v is not None else math.nan for v in history.get("min_pair", [])]
    axes[2].plot(time, mp, color="#d64550")
    axes[2].set_ylabel("min pair dist [m]")
    axes[2].set_xlabel("time [s]")

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_sweep_summary(path: str, rows: list[dict]) -> None:
    """Mean realized participants per parameter combination, as a bar chart."""
    buckets: dict[str, list[float]] = defaultdict(list)
    for row in rows:
        if row.get("error"):
            continue
        value = row.get("realized_participants")
        if value == "" or value is None:
            continue
        label = f"{row['behavior']}\n({row['max_agents']}, {row['marker_density']}, {row['agent_radius']})"
        buckets[label].append(float(value))

    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(buckets)), 4.5))
    labels = sorted(buckets)
    means = [sum(buckets[k]) / len(buckets[k]) for k in labels]
    ax.bar(range(len(labels)), means, color="#3b6fd4")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("mean realized participants")
    for i, (label, mean) in enumerate(zip(labels, means)):
        n = len(buckets[label])
        ax.text(i, mean, f"{mean:.1f} (n={n})", ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
