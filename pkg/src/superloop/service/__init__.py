"""HTTP service: /v1 API, persistence, wire schemas."""

from .app import EngineState, create_app
from .store import LoopRecord, LoopStore

__all__ = ["EngineState", "LoopRecord", "LoopStore", "create_app"]
