"""Euler, Milstein and symmetrized Euler schemes for scalar SDEs with locally
Lipschitz coefficients, and Monte Carlo checks of their error behaviour."""

__version__ = "0.1.0"
