"""hnoma: evolutionary-game analysis and simulation of hybrid uplink NOMA."""

__version__ = "1.0.0"
