"""Modulation classification and spectrum sensing toolkit.

Synthesizes impaired modulated baseband signals, trains an amplitude-phase
LSTM classifier with a from-scratch numpy engine, quantizes trained models
(ternary weights, 4-bit activations), and provides an averaged-magnitude-FFT
sequential-scan pipeline for bandwidth-limited sensors.
"""

__version__ = "0.1.0"
