"""Integration tests for actiongraph.

These tests run complete training and evaluation passes on synthetic data
and only run with ``--integration``.
"""
