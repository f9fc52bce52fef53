"""HTTP layer: pydantic schemas and the FastAPI application factory."""

from .app import create_app, error_kind

__all__ = ["create_app", "error_kind"]
