"""Two giant atoms in a waveguide: kernels, noises, O-operators, trajectories and oracles."""

__version__ = "0.1.0"
