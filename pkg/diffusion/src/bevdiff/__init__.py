"""bevdiff: toy-scale conditional diffusion enhancer for BEV occupancy
grids, speaking the PGM file protocol of the geometry pipeline."""

__version__ = "0.1.0"
