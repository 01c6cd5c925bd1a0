"""
Test package for AI Movie Discovery Platform.
Contains comprehensive test suites for all services and components.
"""
