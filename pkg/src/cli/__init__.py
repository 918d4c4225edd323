"""Command-line entry point and the builders behind it."""
