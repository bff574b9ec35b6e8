"""Two-sided estimates of the spectral gap of radial diffusion
operators, checked against a finite-volume eigenvalue oracle."""

__version__ = "0.1.0"
