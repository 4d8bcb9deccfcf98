"""Numerical core: lattice, losses, model, decoding and their plumbing."""
