"""Benchmark harness: ingestion, splits, experiments, statistics and result files."""
