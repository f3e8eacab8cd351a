"""Linearized Taylor-Hood Navier-Stokes solver with a regularity certificate."""

__version__ = "0.1.0"
