"""Membership-privacy auditing: differential training privacy and membership attacks."""

__version__ = "0.1.0"
