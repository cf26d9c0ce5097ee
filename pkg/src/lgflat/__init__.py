"""Simulation of single-hologram LG mode measurement with intensity flattening."""

__version__ = "0.1.0"
