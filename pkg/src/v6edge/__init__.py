"""Zero-trust IPv6 edge defense pipeline and a labeled attack-scenario harness."""

__version__ = "0.1.0"
