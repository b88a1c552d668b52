"""Generalized Polya urn with graph-based interactions."""
