"""Link-level simulation and frequency-domain MMSE detection for multi-stream
cyclic-prefixed single-carrier massive-MIMO uplinks."""

__version__ = "0.1.0"
