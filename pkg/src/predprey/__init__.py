"""Cooperative coevolution of modular neural predators on a torus grid."""

__version__ = "0.1.0"
