"""Pydantic schemas for data validation and file formats."""
