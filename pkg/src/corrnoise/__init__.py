"""Correlated Ornstein-Uhlenbeck noise acting on one and two qubits."""

__version__ = "0.1.0"
