"""Sensing-SNR simulator for cell-free vs. multi-cell massive-MIMO OFDM-ISAC networks."""

__version__ = "0.1.0"
