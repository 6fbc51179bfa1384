"""Test helpers for actiongraph."""
