"""Packaged text assets: the candidate-vocabulary request template."""
