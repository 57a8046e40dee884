"""Pod consensus layer: replicas, clients, validity, accountability and bidset."""

__version__ = "0.1.0"
