"""Core pipeline steps behind the command-line interface."""

from .handlers import PipelineHandler

__all__ = ["PipelineHandler"]
