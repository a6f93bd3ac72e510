"""Exact p-adic computations around crystalline representations of dimension 2:
fixed-precision scalars, truncated power series, filtered phi-modules,
Wach modules and their lifts, p-adic distributions and the GL2 side."""

__version__ = "0.1.0"
