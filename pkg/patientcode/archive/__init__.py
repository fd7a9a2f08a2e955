"""Monogram archive: persistence, Hamming/real-code search and majority voting."""
