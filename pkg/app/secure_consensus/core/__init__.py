"""Process configuration and the exception hierarchy."""
