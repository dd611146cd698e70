"""Phase assignment optimization for single-phase rooftop PV units on
unbalanced three-phase four-wire LV feeders."""

__version__ = "0.1.0"
