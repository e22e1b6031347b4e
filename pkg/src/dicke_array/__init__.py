"""Single-photon Dicke states in 1-D emitter arrays: retarded collective
dynamics, the mirror-less cavity mapping and Leggett-Garg tests."""

__version__ = "0.1.0"
