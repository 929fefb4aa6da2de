"""Synthetic data, file formats and the end-to-end pipeline behind the CLI."""
