"""Cython builds of the simulation modules; populated by setup.py."""
