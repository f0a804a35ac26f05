"""Minimal runtime infrastructure: coordinator, messages and transports."""

from .coordinator import Coordinator, CoordinatorServer, FederationState, Member, compute_grants
from .messages import Kind, RtiMessage, frame, read_frame
from .transport import (
    Connection,
    InProcNetwork,
    TcpAcceptor,
    TcpConnection,
    open_connection,
    parse_address,
    resolve_address,
)

__all__ = [
    "Connection",
    "Coordinator",
    "CoordinatorServer",
    "FederationState",
    "InProcNetwork",
    "Kind",
    "Member",
    "RtiMessage",
    "TcpAcceptor",
    "TcpConnection",
    "compute_grants",
    "frame",
    "open_connection",
    "parse_address",
    "read_frame",
    "resolve_address",
]
