"""Domain layer containing models, schemas and errors."""
