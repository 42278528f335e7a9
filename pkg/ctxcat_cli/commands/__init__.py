"""CLI commands for ctxcat."""
