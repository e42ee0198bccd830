"""Spline differential-quadrature solvers for fractional advection-diffusion problems."""
__version__ = "0.1.0"
