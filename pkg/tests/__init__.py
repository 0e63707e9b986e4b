"""Test configuration file."""
