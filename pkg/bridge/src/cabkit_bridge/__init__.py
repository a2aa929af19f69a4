"""Bridge a host-driven model loop onto the corrected multistep sampler."""

from .session import (
    PARAMETERIZATIONS,
    BridgeSession,
    ProtocolError,
    create_session,
)

__version__ = "0.1.0"

__all__ = ["BridgeSession", "PARAMETERIZATIONS", "ProtocolError", "create_session"]
