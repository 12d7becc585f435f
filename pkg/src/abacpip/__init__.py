"""ABAC policy inference from an existing policy with tree learners."""

__version__ = "0.1.0"
