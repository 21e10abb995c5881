"""Workbench for tree wrapper languages sharing one document model and one
regular path-plus-range engine: a binary datalog core, a path-expression
frontend, and a condition-chain frontend, with translations between them."""

__version__ = "0.1.0"
