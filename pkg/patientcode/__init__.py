"""Multimodal binary patient codes with a Hamming-searchable archive.

Packages:
1. data: case records, embedding dumps, min-max scaling, folds, synthetic data.
2. nn: dense layers, losses, Adam, gradient checking, checkpoints.
3. latent: hybrid cross-modal autoencoders and reconstruction reports.
4. fusion: outer-product fusion network producing 64-bit monograms.
5. archive: monogram archive, top-k search and majority voting.
6. evaluation: leave-one-out retrieval, cross-validation, XOR maps, PCA.
7. cli: configuration, manifests and subcommands.
"""

__version__ = "0.1.0"
