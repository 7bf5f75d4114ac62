"""Conversational fashion photo-editing engine.

Turns free-text editing requirements into typed edit tasks, synthesizes
task-specific editing masks from fused human-semantic label maps, and
dispatches guided-generation jobs to pluggable model backends. A fully
deterministic mock backend suite lets the whole pipeline run with zero
model weights.
"""

__version__ = "0.1.0"
