"""Stigmergic ant swarm whose population grows and shrinks with the terrain,
run on landscapes that move over time."""

__version__ = "0.1.0"
