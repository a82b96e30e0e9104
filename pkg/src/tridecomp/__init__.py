"""Randomised algebraic triangle decompositions and Steiner triple system counting."""

__version__ = "0.1.0"
