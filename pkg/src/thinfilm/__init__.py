"""Pseudo-spectral simulation of thin-film epitaxy with Ehrlich-Schwoebel currents."""

__version__ = "0.1.0"
