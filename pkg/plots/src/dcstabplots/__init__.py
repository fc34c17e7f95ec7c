"""Figure rendering for dcstab CSV artifacts."""

from .render import KINDS, PlotSpec, RenderError, render

__version__ = "0.1.0"
