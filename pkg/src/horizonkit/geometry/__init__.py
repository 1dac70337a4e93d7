"""Numerical tensor calculus on coordinate charts."""
