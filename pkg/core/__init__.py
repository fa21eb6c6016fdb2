"""Core simulator modules."""
