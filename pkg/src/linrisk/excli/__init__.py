"""Command-line experiment runner: configs, seeded replicas, tabular output."""
