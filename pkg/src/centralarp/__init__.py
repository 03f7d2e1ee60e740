"""Centralized secure ARP: frame codec, authentication, simulator and scenarios."""

__version__ = "0.1.0"
