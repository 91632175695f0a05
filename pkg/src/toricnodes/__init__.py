"""Node monodromy of rational curves on toric surfaces."""

__version__ = "0.1.0"
