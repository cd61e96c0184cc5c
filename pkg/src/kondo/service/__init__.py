"""Interactive session protocol: engine (transport-free) and asyncio server."""

from .engine import ProtocolEngine, SessionRegistry

__all__ = ["ProtocolEngine", "SessionRegistry"]
