"""Command implementations behind the svd-rnd CLI."""
