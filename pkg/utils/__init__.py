"""Utility functions for nevo_gspt."""
