"""Test suite for lipbound."""
