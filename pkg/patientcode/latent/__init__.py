"""Hybrid cross-modal autoencoders producing the enriched latents u and v."""
