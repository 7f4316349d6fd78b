"""TCN speech separation with global-context blocks, mixture simulation and TSL sampling."""

__version__ = "0.1.0"
