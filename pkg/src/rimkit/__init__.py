"""Random invariant manifolds for finite spectral truncations of SPDEs with linear multiplicative noise."""

__version__ = "0.1.0"
