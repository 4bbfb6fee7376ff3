"""Long-range random walks on point sets as resistor networks."""

__version__ = "0.1.0"
