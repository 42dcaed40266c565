"""Two-site Bose-Hubbard dimer: exact dynamics, WKB, spin Wigner functions and truncated-Wigner ensembles."""

__version__ = "0.1.0"
