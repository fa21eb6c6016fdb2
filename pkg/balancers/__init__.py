"""Push-mode load-balancing policies."""
