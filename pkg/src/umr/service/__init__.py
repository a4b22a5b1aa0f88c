"""HTTP registry service exposing the index, records and advisories."""

from umr.service.app import create_app, serve
from umr.service.schemas import ServiceConfig

__all__ = ["create_app", "serve", "ServiceConfig"]
