"""Persistence: model files, dataset files and run artifacts."""
