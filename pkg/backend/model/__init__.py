"""Quixer model assembly, checkpoints and exact gradients."""
