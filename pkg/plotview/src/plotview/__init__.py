"""Figure rendering for qswitch trajectory CSV files."""

from .render import PlotSpec, SeriesSpec, load_channel, render

__version__ = "0.1.0"
