"""Water-quality AUV mission stack: route planning, guidance, telegrams and HIL simulation."""

__version__ = "0.1.0"
