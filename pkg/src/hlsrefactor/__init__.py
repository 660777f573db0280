"""Refactor generic C into HLS-synthesizable C with an LLM in a compile/synthesis loop."""

__version__ = "0.1.0"
