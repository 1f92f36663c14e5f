"""Quasi-neutral multi-strain SIS coinfection dynamics and their replicator reduction."""

__version__ = "0.1.0"
