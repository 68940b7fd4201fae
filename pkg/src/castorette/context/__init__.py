from .store import (
    ContextKey,
    ContextStore,
    Entity,
    EntityType,
    Relation,
    Signal,
    SignalType,
    PARENT_OF,
    CONNECTED_TO,
)

__all__ = [
    "ContextKey",
    "ContextStore",
    "Entity",
    "EntityType",
    "Relation",
    "Signal",
    "SignalType",
    "PARENT_OF",
    "CONNECTED_TO",
]
