"""Mean-field fermion dynamics: exact N-body flow against time-dependent Hartree-Fock."""

__version__ = "0.1.0"
