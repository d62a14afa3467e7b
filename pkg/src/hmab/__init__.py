"""Hidden-Markov bandit arms with intermittent availability."""

__version__ = "0.1.0"
