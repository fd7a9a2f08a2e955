"""Retrieval evaluation, baselines, dissimilarity and PCA analyses."""
