"""Random-graph simulator and limit oracle for zero-one laws of GNN classifiers."""

__version__ = "0.1.0"
