"""Temporal reinforcement learning over synthesized automata."""
