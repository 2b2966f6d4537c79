"""Homotopy dimension of codiscrete planar sets, decided and constructed on dyadic rasters."""

__version__ = "0.1.0"
