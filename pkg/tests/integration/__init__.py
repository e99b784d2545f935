"""Integration tests for PEaRL."""
