"""Averaging operators, fixed points and local rigidity of finite group actions."""

__version__ = "0.1.0"
SCHEMA_VERSION = 1
