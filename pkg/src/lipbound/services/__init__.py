"""Numerical and business logic layer."""
