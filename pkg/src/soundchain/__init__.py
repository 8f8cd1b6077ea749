"""Iterated learning of an allophonic VOT pattern with raw-waveform GANs."""

__version__ = "0.1.0"
