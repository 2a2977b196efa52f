"""nilspectra: transfer-operator spectra of Heisenberg nilmanifold automorphisms."""

__version__ = "0.3.0"
