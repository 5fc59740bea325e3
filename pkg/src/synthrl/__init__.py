"""Automaton synthesis from exploration traces and automaton-guided RL."""
__version__ = "0.1.0"
