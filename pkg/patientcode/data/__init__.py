"""Case records, embedding ingestion, scaling, folds and synthetic data."""
