"""RF Asset Discovery tests."""
