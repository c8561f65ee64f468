"""Batch-inspection service: REST API, storage, and configuration."""

from surgscan.service.app import create_app
from surgscan.service.config import SeedUser, ServiceConfig, load_config
from surgscan.service.store import (
    AlreadyAssigned,
    BatchClosed,
    InactiveAccount,
    InvalidCredentials,
    Store,
    UnknownBatch,
    UnknownUser,
)

__all__ = [
    "AlreadyAssigned",
    "BatchClosed",
    "InactiveAccount",
    "InvalidCredentials",
    "SeedUser",
    "ServiceConfig",
    "Store",
    "UnknownBatch",
    "UnknownUser",
    "create_app",
    "load_config",
]
