"""twinforge: turn a reconstructed static scene into an articulated, renderable, simulatable twin."""

__version__ = "0.1.0"
