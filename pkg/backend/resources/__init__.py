"""Fault-tolerant resource estimation."""
