"""Rendering tests against hand-written CSVs in the qswitch schema."""

import os

import numpy as np
import pytest

from plotview.cli import main
from plotview.render import PlotSpec, SeriesSpec, load_channel, render

HEADER = "t,re_a,im_a,pop_g,pop_h,pop_s,pop_e,p_out,p_outbar,norm_amp"


def write_csv(path, rows, comment=True):
    with open(path, "w") as f:
        if comment:
            f.write("# scenario: model=primary mode=SET init=g beta=0.5\n")
        f.write(HEADER + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")


def make_row(t, norm_amp, pop_g="", pop_h=""):
    return [f"{t:.6e}", "0", "0", pop_g, pop_h, "", "",
            "1e-3", "2e-1", f"{norm_amp:.6e}"]


@pytest.fixture
def pair(tmp_path):
    g_path = str(tmp_path / "run_g.csv")
    h_path = str(tmp_path / "run_h.csv")
    ts = np.linspace(0, 600, 30)
    write_csv(g_path, [make_row(t, 1 - np.exp(-t / 100)) for t in ts])
    write_csv(h_path, [make_row(t, 1.0) for t in ts])
    return g_path, h_path


def test_load_channel_reads_time_series(pair):
    g_path, _ = pair
    t, v = load_channel(g_path, "norm_amp")
    assert len(t) == 30
    assert t[0] == 0.0
    assert v[-1] == pytest.approx(1 - np.exp(-6.0), abs=1e-6)


def test_load_channel_missing_column(pair):
    g_path, _ = pair
    with pytest.raises(ValueError, match="no channel"):
        load_channel(g_path, "bogus")


def test_load_channel_empty_field_rejected(pair):
    g_path, _ = pair
    with pytest.raises(ValueError, match="pop_g"):
        load_channel(g_path, "pop_g")


def test_load_channel_malformed_row_names_line(tmp_path):
    path = str(tmp_path / "bad.csv")
    with open(path, "w") as f:
        f.write(HEADER + "\n")
        f.write("0.0,1.0\n")
    with pytest.raises(ValueError, match=":2:"):
        load_channel(path, "norm_amp")


def test_render_two_curve_convention(pair, tmp_path):
    """Initial-|g> series: broken black; initial-|h>: solid red; legend on."""
    g_path, h_path = pair
    out = str(tmp_path / "fig.png")
    spec = PlotSpec(inputs=(SeriesSpec(g_path, "g"), SeriesSpec(h_path, "h")),
                    out_path=out)
    render(spec)
    assert os.path.getsize(out) > 0

    # inspect the drawn artists through a fresh Agg figure
    import matplotlib.pyplot as plt
    from plotview.render import _STYLE, load_channel as lc
    fig, ax = plt.subplots()
    for series in spec.inputs:
        t, v = lc(series.path, spec.channel)
        ax.plot(t, v, **_STYLE[series.label])
    lines = ax.get_lines()
    assert lines[0].get_color() == "black"
    assert lines[0].get_linestyle() == "--"
    assert lines[1].get_color() == "red"
    assert lines[1].get_linestyle() == "-"
    plt.close(fig)


def test_render_identical_inputs_identical_series(pair, tmp_path):
    g_path, _ = pair
    t1, v1 = load_channel(g_path, "norm_amp")
    t2, v2 = load_channel(g_path, "norm_amp")
    np.testing.assert_array_equal(t1, t2)
    np.testing.assert_array_equal(v1, v2)
    before = open(g_path, "rb").read()
    render(PlotSpec(inputs=(SeriesSpec(g_path, "g"),),
                    out_path=str(tmp_path / "f.png")))
    assert open(g_path, "rb").read() == before   # inputs untouched


def test_render_single_row_marker(tmp_path):
    path = str(tmp_path / "one.csv")
    write_csv(path, [make_row(0.0, 0.5)])
    out = str(tmp_path / "one.png")
    render(PlotSpec(inputs=(SeriesSpec(path, "h"),), out_path=out))
    assert os.path.getsize(out) > 0


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        PlotSpec(inputs=(), out_path="x.png")
    with pytest.raises(ValueError):
        SeriesSpec("a.csv", "q")
    spec = PlotSpec(inputs=(SeriesSpec("a.csv", "g"),), out_path="x.png",
                    channel="")
    assert spec.channel == "norm_amp"


def test_cli_plot(pair, tmp_path, capsys):
    g_path, h_path = pair
    out = str(tmp_path / "cli.png")
    rc = main(["plot", "--in", f"{g_path}:g", "--in", f"{h_path}:h",
               "--channel", "norm_amp", "--out", out])
    assert rc == 0
    assert os.path.exists(out)


def test_cli_bad_label(pair, tmp_path):
    g_path, _ = pair
    rc = main(["plot", "--in", f"{g_path}:x",
               "--out", str(tmp_path / "x.png")])
    assert rc == 2


def test_cli_missing_channel(pair, tmp_path):
    g_path, _ = pair
    rc = main(["plot", "--in", f"{g_path}:g", "--channel", "nope",
               "--out", str(tmp_path / "x.png")])
    assert rc == 2
