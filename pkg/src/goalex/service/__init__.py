"""HTTP service exposing the workbench operations."""
