"""Scenario files, scenario execution and artifact export for the command line."""
