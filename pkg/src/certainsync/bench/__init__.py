"""Experiment harness: scenario generators, trial runner, CSV output, CLI."""
