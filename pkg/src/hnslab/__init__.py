"""hnslab: pseudo-spectral laboratory for hyperbolic perturbations of Navier-Stokes."""

__version__ = "0.1.0"
