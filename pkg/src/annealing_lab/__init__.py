"""Markov-chain Hamiltonians, gap amplification and annealing experiments."""

__version__ = "0.1.0"
