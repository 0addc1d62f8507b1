"""Simulation of VLC-driven ambient backscatter devices and their receiver chain."""

__version__ = "0.1.0"
