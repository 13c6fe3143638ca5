"""Auto-grading and error localization for open-response math solutions."""

__version__ = "0.1.0"
