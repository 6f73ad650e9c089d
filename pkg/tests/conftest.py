"""Shared pytest configuration (keeps tests/ importable for oracles.py)."""
