from .app import RunContext, create_app

__all__ = ["RunContext", "create_app"]
