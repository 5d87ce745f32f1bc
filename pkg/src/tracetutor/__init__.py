"""tracetutor: dialogue-based code-understanding assessment on execution traces."""

__version__ = "0.1.0"
