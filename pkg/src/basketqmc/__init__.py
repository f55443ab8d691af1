"""Monte Carlo, Latin Hypercube and randomized quasi-Monte Carlo pricing of
arithmetic Asian basket options with Cholesky, PCA and Kronecker-product
approximation path generators."""

__version__ = "0.1.0"
