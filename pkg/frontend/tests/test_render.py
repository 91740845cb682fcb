import pytest

from belief_plots import PlotSpec, read_trace_csv, render
from belief_plots.render import THREE_HYPOTHESIS_COLORS, build_figure, hypothesis_colors

from trace_fixtures import make_trace_csv


def visible_axes(fig):
    return [ax for ax in fig.axes if ax.get_visible()]


def test_four_agent_grid(tmp_path, trace_csv_path):
    out = render(PlotSpec(csv_path=trace_csv_path, out_path=tmp_path / "fig.png"))
    assert out.exists() and out.stat().st_size > 0


def test_panel_count_matches_agents():
    for n in (1, 3, 4):
        data = read_trace_csv(make_trace_csv(n=n, horizon=5))
        fig = build_figure(data, PlotSpec(csv_path="-", out_path="-"))
        axes = visible_axes(fig)
        assert len(axes) == n
        # one curve per hypothesis in each panel
        assert all(len(ax.lines) == data.m for ax in axes)


def test_three_hypothesis_color_convention():
    assert hypothesis_colors(3, None) == list(THREE_HYPOTHESIS_COLORS)
    # other counts fall back to the default cycle
    assert len(hypothesis_colors(5, None)) == 5
    assert hypothesis_colors(2, ("k", "m")) == ["k", "m"]
    with pytest.raises(ValueError):
        hypothesis_colors(3, ("k", "m"))


def test_winner_curve_approaches_one():
    data = read_trace_csv(make_trace_csv(n=2, m=3, horizon=200, winner=2))
    fig = build_figure(data, PlotSpec(csv_path="-", out_path="-"))
    ax = visible_axes(fig)[0]
    winner_y = ax.lines[2].get_ydata()
    assert winner_y[-1] > 0.95 > winner_y[0]


def test_render_deterministic(tmp_path, trace_csv_path):
    a = render(PlotSpec(csv_path=trace_csv_path, out_path=tmp_path / "a.png"))
    b = render(PlotSpec(csv_path=trace_csv_path, out_path=tmp_path / "b.png"))
    assert a.read_bytes() == b.read_bytes()


def test_title_and_labels(tmp_path, trace_csv_path):
    out = render(
        PlotSpec(
            csv_path=trace_csv_path,
            out_path=tmp_path / "t.png",
            title="run",
            agent_labels=("a", "b", "c", "d"),
        )
    )
    assert out.exists()
    data = read_trace_csv(make_trace_csv(n=4, horizon=3))
    with pytest.raises(ValueError):
        build_figure(data, PlotSpec(csv_path="-", out_path="-", agent_labels=("x",)))
