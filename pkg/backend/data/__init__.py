"""Corpus ingestion and next-token windowing."""
