"""Bowen-Series boundary maps, growth rates of geodesics and their large deviations."""

__version__ = "0.1.0"
