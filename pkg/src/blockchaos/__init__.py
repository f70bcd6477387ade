"""Block random matrices with a ring interaction: sampling, Dyson equation,
spectral statistics, resolvent observables and localization diagnostics."""

__version__ = "0.1.0"
