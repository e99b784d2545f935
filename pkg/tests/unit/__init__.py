"""Unit tests for PEaRL modules."""
