"""Noisy SEMO on OneMinMax under one-bit prior noise."""
