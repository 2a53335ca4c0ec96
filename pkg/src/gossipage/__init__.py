"""Age and version age of gossip networks: exact recursions, bounds and simulation."""
__version__ = "0.1.0"
