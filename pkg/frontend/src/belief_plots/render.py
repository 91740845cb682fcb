"""Per-agent belief-evolution panels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .reader import read_trace_csv  # noqa: E402

# Three-hypothesis traces use the fixed blue/red/yellow convention; other
# counts fall back to the default cycle.
THREE_HYPOTHESIS_COLORS = ("tab:blue", "tab:red", "gold")


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str | Path
    out_path: str | Path
    title: str | None = None
    agent_labels: tuple[str, ...] | None = None
    colors: tuple[str, ...] | None = None
    dpi: int = 120
    max_cols: int = 2
    sum_tol: float = 1e-6
    metadata: dict = field(default_factory=lambda: {"Software": "belief-plots"})


def hypothesis_colors(m: int, override: tuple[str, ...] | None) -> list[str]:
    if override is not None:
        if len(override) != m:
            raise ValueError(f"{len(override)} colors for {m} hypotheses")
        return list(override)
    if m == len(THREE_HYPOTHESIS_COLORS):
        return list(THREE_HYPOTHESIS_COLORS)
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return [cycle[t % len(cycle)] for t in range(m)]


def build_figure(data, spec: PlotSpec):
    """Lay out one subplot per agent, one curve per hypothesis."""
    colors = hypothesis_colors(data.m, spec.colors)
    labels = spec.agent_labels or tuple(f"agent {i}" for i in range(data.n))
    if len(labels) != data.n:
        raise ValueError(f"{len(labels)} labels for {data.n} agents")

    cols = min(spec.max_cols, data.n)
    rows = math.ceil(data.n / cols)
    fig, axes = plt.subplots(
        rows, cols, figsize=(5.0 * cols, 3.2 * rows), squeeze=False, sharex=True
    )
    for i in range(data.n):
        ax = axes[i // cols][i % cols]
        for t in range(data.m):
            ax.plot(
                data.ticks,
                data.beliefs[:, i, t],
                color=colors[t],
                label=rf"$\theta_{{{t + 1}}}$",
                linewidth=1.4,
            )
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(labels[i], fontsize=10)
        ax.set_ylabel("belief")
        if i // cols == rows - 1:
            ax.set_xlabel("tick")
        if i == 0:
            ax.legend(loc="center right", fontsize=8)
    for idx in range(data.n, rows * cols):
        axes[idx // cols][idx % cols].set_visible(False)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Render the figure to spec.out_path; deterministic for fixed input."""
    data = read_trace_csv(Path(spec.csv_path).read_text(), sum_tol=spec.sum_tol)
    fig = build_figure(data, spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi, metadata=spec.metadata)
    plt.close(fig)
    return out
