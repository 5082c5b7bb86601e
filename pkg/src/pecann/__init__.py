"""Physics and equality constrained neural networks for PDEs, in NumPy."""
__version__ = "0.1.0"
