"""Render switching trajectories in the two-curve convention.

Input files follow the qswitch CSV schema: an optional leading ``#``
comment, a fixed header row, then numeric rows (absent channels are empty
fields).  Each input carries an initial-state label: series labeled ``g``
are drawn as a broken black line, series labeled ``h`` as a solid red line.
Rendering never modifies its inputs, and the plotted data is a pure
function of the file contents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DEFAULT_CHANNEL = "norm_amp"

_STYLE = {
    "g": {"color": "black", "linestyle": "--"},
    "h": {"color": "red", "linestyle": "-"},
}


@dataclass(frozen=True)
class SeriesSpec:
    """One input file and the initial atomic state it was run from."""

    path: str
    label: str

    def __post_init__(self):
        if self.label not in _STYLE:
            raise ValueError(
                f"label must be 'g' or 'h', got {self.label!r} for {self.path}")


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[SeriesSpec, ...]
    out_path: str
    channel: str = DEFAULT_CHANNEL
    xlabel: str = "time"
    ylabel: str | None = None
    title: str | None = None

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one input series is required")
        if not self.channel:
            object.__setattr__(self, "channel", DEFAULT_CHANNEL)


def load_channel(path: str, channel: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (t, values) for one channel of a trajectory CSV.

    Raises ValueError naming the offending line for malformed rows, and for
    channels that are missing from the header or written as empty fields.
    """
    with open(path) as f:
        lineno = 0
        header = None
        while header is None:
            line = f.readline()
            lineno += 1
            if not line:
                raise ValueError(f"{path}: empty file")
            if not line.startswith("#"):
                header = line.strip().split(",")
        if "t" not in header:
            raise ValueError(f"{path}: no 't' column in header {header}")
        if channel not in header:
            raise ValueError(
                f"{path}: no channel {channel!r}; available: {header}")
        it, ic = header.index("t"), header.index(channel)
        times, values = [], []
        for line in f:
            lineno += 1
            row = line.rstrip("\n").split(",")
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} "
                                 f"fields, got {len(row)}")
            if row[ic] == "":
                raise ValueError(f"{path}:{lineno}: channel {channel!r} "
                                 "is empty in this file")
            try:
                times.append(float(row[it]))
                values.append(float(row[ic]))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: non-numeric field") from None
    if not times:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(times), np.asarray(values)


def render(spec: PlotSpec) -> str:
    """Draw every input series into one figure and write the image file."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        for series in spec.inputs:
            t, v = load_channel(series.path, spec.channel)
            style = _STYLE[series.label]
            if len(t) == 1:
                ax.plot(t, v, marker="o", label=f"initial |{series.label}>",
                        color=style["color"])
            else:
                ax.plot(t, v, label=f"initial |{series.label}>", **style)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel if spec.ylabel is not None else spec.channel)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path
