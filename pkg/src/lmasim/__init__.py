"""Link-level simulator for downlink multiuser load-modulation-array MIMO systems."""

__version__ = "0.1.0"
