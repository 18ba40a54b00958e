"""Workbench for the (1+1)-dimensional replication automaton: simulation,
hidden percolation pattern labeling, indexed dataset storage, and
phase-diagram sweeps."""

__version__ = "0.1.0"
