"""Outer-product fusion into 64-bit monograms and its triplet training."""
