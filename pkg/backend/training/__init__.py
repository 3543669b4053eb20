"""Optimizer and training loop."""
