"""Monte Carlo tree search Go engine driven by convolutional policy networks."""

__version__ = "0.1.0"
