"""Delay SDE lab: Euler schemes with mesh-aligned delays, Malliavin variations,
and Monte Carlo rate experiments for the Carathéodory approximation."""

__version__ = "0.1.0"
