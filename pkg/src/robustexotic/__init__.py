"""Robust superhedging and model prices for multi-action exotic options."""

__version__ = "0.1.0"
