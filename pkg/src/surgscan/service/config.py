"""Service configuration: JSON file plus SURGSCAN_* environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Union


@dataclass(frozen=True)
class SeedUser:
    name: str
    email: str
    password: str
    role: str = "User"

    def __post_init__(self) -> None:
        if self.role not in ("Admin", "User"):
            raise ValueError(f"role must be Admin or User, got {self.role!r}")
        if not self.email or "@" not in self.email:
            raise ValueError(f"invalid email {self.email!r}")


# Demo accounts, used only when no config file provides users. Deployments
# must supply their own credentials (see README).
DEFAULT_USERS = (
    SeedUser(name="Admin", email="admin@surgscan.local", password="admin", role="Admin"),
    SeedUser(name="Operator", email="operator@surgscan.local", password="operator", role="User"),
)


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path = Path("surgscan-data")
    database: Optional[Path] = None  # default: <data_dir>/surgscan.db
    port: int = 8000
    resize_long_side: int = 640
    unsharp_radius: float = 2.0
    unsharp_amount: float = 1.0
    instrument_threshold: float = 0.50
    defect_threshold: float = 0.50
    backend: str = "stub"  # "stub" or "external"
    external_stage1_command: tuple[str, ...] = ()
    external_defect_command: tuple[str, ...] = ()
    users: tuple[SeedUser, ...] = DEFAULT_USERS

    def __post_init__(self) -> None:
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if self.database is not None:
            object.__setattr__(self, "database", Path(self.database))
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "external_stage1_command", tuple(self.external_stage1_command))
        object.__setattr__(self, "external_defect_command", tuple(self.external_defect_command))
        if self.backend not in ("stub", "external"):
            raise ValueError(f"backend must be 'stub' or 'external', got {self.backend!r}")
        if self.backend == "external" and not (
            self.external_stage1_command and self.external_defect_command
        ):
            raise ValueError("external backend requires both stage command lines")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")
        if self.resize_long_side < 1:
            raise ValueError("resize_long_side must be >= 1")

    @property
    def database_path(self) -> Path:
        return self.database if self.database is not None else self.data_dir / "surgscan.db"

    @property
    def images_dir(self) -> Path:
        return self.data_dir / "images"

    def describe(self) -> dict:
        """Loggable view of the effective config; passwords omitted."""
        return {
            "data_dir": str(self.data_dir),
            "database": str(self.database_path),
            "port": self.port,
            "resize_long_side": self.resize_long_side,
            "unsharp_radius": self.unsharp_radius,
            "unsharp_amount": self.unsharp_amount,
            "instrument_threshold": self.instrument_threshold,
            "defect_threshold": self.defect_threshold,
            "backend": self.backend,
            "users": [{"email": u.email, "role": u.role} for u in self.users],
        }


def _config_from_mapping(obj: Mapping) -> ServiceConfig:
    users = tuple(
        SeedUser(
            name=u["name"],
            email=u["email"],
            password=u["password"],
            role=u.get("role", "User"),
        )
        for u in obj.get("users", [])
    ) or DEFAULT_USERS
    kwargs = {}
    for key in (
        "data_dir",
        "database",
        "port",
        "resize_long_side",
        "unsharp_radius",
        "unsharp_amount",
        "instrument_threshold",
        "defect_threshold",
        "backend",
        "external_stage1_command",
        "external_defect_command",
    ):
        if key in obj:
            kwargs[key] = obj[key]
    return ServiceConfig(users=users, **kwargs)


_ENV_FIELDS = {
    "SURGSCAN_DATA_DIR": ("data_dir", Path),
    "SURGSCAN_DATABASE": ("database", Path),
    "SURGSCAN_PORT": ("port", int),
    "SURGSCAN_RESIZE_LONG_SIDE": ("resize_long_side", int),
    "SURGSCAN_UNSHARP_RADIUS": ("unsharp_radius", float),
    "SURGSCAN_UNSHARP_AMOUNT": ("unsharp_amount", float),
    "SURGSCAN_INSTRUMENT_THRESHOLD": ("instrument_threshold", float),
    "SURGSCAN_DEFECT_THRESHOLD": ("defect_threshold", float),
    "SURGSCAN_BACKEND": ("backend", str),
}


def load_config(
    path: Optional[Union[Path, str]] = None, env: Optional[Mapping[str, str]] = None
) -> ServiceConfig:
    """Read config from a JSON file (if given), then apply env overrides."""
    env = os.environ if env is None else env
    if path is not None:
        obj = json.loads(Path(path).read_text())
        config = _config_from_mapping(obj)
    else:
        config = ServiceConfig()
    overrides = {}
    for var, (field_name, cast) in _ENV_FIELDS.items():
        if var in env:
            overrides[field_name] = cast(env[var])
    if overrides:
        config = replace(config, **overrides)
    return config
