"""Predictive-coding networks (iPC, PC, Z-IL, BP) backed by the C++ core."""

from ._pcn import (
    AuditError,
    ConfigError,
    DivergenceError,
    EngineError,
    Network,
    ParseError,
    PcnError,
    ShapeError,
    UsageError,
    __version__,
    ada_ece,
    bp_update,
    predicted_smm,
    read_idx,
    run,
    train,
    zil_update,
)

__all__ = [
    "AuditError",
    "ConfigError",
    "DivergenceError",
    "EngineError",
    "Network",
    "ParseError",
    "PcnError",
    "ShapeError",
    "UsageError",
    "__version__",
    "ada_ece",
    "bp_update",
    "predicted_smm",
    "read_idx",
    "run",
    "train",
    "zil_update",
]
