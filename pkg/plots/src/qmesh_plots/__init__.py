"""qmesh-plots: turn qmesh result CSVs into figures."""

__version__ = "0.1.0"
