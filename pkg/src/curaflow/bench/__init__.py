"""Dataset loading, metrics and reports for the demo tasks."""
