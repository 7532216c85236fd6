"""Krull dimension of metabelian groups, random-walk return probabilities and
Folner couples."""

__version__ = "0.1.0"
