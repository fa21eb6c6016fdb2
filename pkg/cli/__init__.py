"""Command-line orchestration: single runs, comparisons and validation."""
