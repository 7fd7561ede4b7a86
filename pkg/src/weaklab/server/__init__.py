"""HTTP annotation service and model-server bridge."""

from .app import create_app
from .bridge import (
    BadResponse,
    BridgeError,
    ModelServerConfig,
    RemoteError,
    Timeout,
    bridge_predict,
    build_request,
    parse_response,
)
from .jobs import JobRegistry
from .store import FlushError, ProjectStore, VersionConflict

__all__ = [
    "BadResponse",
    "BridgeError",
    "FlushError",
    "JobRegistry",
    "ModelServerConfig",
    "ProjectStore",
    "RemoteError",
    "Timeout",
    "VersionConflict",
    "bridge_predict",
    "build_request",
    "create_app",
    "parse_response",
]
