"""qmesh: cycle-level 2D-mesh NoC simulator with a pluggable routing-policy layer."""

__version__ = "0.1.0"
