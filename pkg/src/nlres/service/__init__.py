"""HTTP front end: a thin request/response wrapper over the command layer."""

from .app import create_app

__all__ = ["create_app"]
