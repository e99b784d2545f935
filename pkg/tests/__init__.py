"""Test suite for PEaRL."""
