"""Orchestration and evaluation harness for iterative text-image plan generation."""

__version__ = "0.1.0"
