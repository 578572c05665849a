"""Rotation-symmetric bosonic codes built from squeezed vacua, simulated in a truncated Fock space."""

__version__ = "0.1.0"
