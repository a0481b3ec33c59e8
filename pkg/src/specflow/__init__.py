"""Spectral flow and index-gerbe invariants for families of self-adjoint operators."""
