"""Energy and entropy experiments: Markov free energy, entropy along the CLT,
free-probability moments, and sampling of confined particle gases."""

__version__ = "0.1.0"
