"""Embedded relational store for users, sessions, batches, and images.

All cross-request state lives here; request handlers hold no in-process
state, so the single-open-batch rule is enforced by a partial unique index
rather than locks.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

from surgscan.core import SurgScanError
from surgscan.service.config import SeedUser

PBKDF2_ITERATIONS = 100_000


class InvalidCredentials(SurgScanError):
    pass


class InactiveAccount(SurgScanError):
    pass


class AlreadyAssigned(SurgScanError):
    """Caller already owns an Open batch."""


class UnknownBatch(SurgScanError):
    pass


class UnknownUser(SurgScanError):
    pass


class BatchClosed(SurgScanError):
    pass


@dataclass(frozen=True)
class User:
    id: int
    name: str
    email: str
    role: str
    status: str
    profile_image: Optional[str] = None

    @property
    def is_admin(self) -> bool:
        return self.role == "Admin"

    @property
    def is_active(self) -> bool:
        return self.status == "Active"


@dataclass(frozen=True)
class Batch:
    id: int
    batch_number: str
    owner_id: int
    state: str
    created_at: str


@dataclass(frozen=True)
class BatchStats:
    total_inspected: int
    defected: int
    non_defected: int
    per_defect_class: dict[str, int]

    def to_json(self) -> dict:
        return {
            "total_inspected": self.total_inspected,
            "defected": self.defected,
            "non_defected": self.non_defected,
            "per_defect_class": dict(sorted(self.per_defect_class.items())),
        }


def hash_password(password: str, salt: Optional[bytes] = None) -> str:
    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, PBKDF2_ITERATIONS)
    return f"pbkdf2_sha256${PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, iterations, salt_hex, digest_hex = stored.split("$")
        if scheme != "pbkdf2_sha256":
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), int(iterations)
        )
        return secrets.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    name TEXT NOT NULL,
    email TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    role TEXT NOT NULL CHECK (role IN ('Admin', 'User')),
    status TEXT NOT NULL DEFAULT 'Active' CHECK (status IN ('Active', 'Inactive')),
    profile_image TEXT
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS batches (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    batch_number TEXT UNIQUE,
    owner_id INTEGER NOT NULL REFERENCES users(id),
    state TEXT NOT NULL DEFAULT 'Open' CHECK (state IN ('Open', 'Closed')),
    created_at TEXT NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS one_open_batch_per_owner
    ON batches(owner_id) WHERE state = 'Open';
CREATE TABLE IF NOT EXISTS batch_images (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    batch_id INTEGER NOT NULL REFERENCES batches(id),
    original_filename TEXT NOT NULL,
    stored_path TEXT NOT NULL,
    uploaded_at TEXT NOT NULL,
    result_json TEXT,
    failure TEXT
);
"""


class Store:
    """SQLite-backed persistence with per-thread connections (WAL mode)."""

    def __init__(self, db_path: Union[Path, str], images_dir: Union[Path, str]):
        self.db_path = Path(db_path)
        self.images_dir = Path(images_dir)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.images_dir.mkdir(parents=True, exist_ok=True)
        self._local = threading.local()
        with self._connection() as conn:
            conn.executescript(_SCHEMA)

    def _connection(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self.db_path, timeout=10.0)
            conn.row_factory = sqlite3.Row
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA busy_timeout=10000")
            conn.execute("PRAGMA foreign_keys=ON")
            self._local.conn = conn
        return conn

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None

    # -- users ---------------------------------------------------------

    def seed_users(self, users: Sequence[SeedUser]) -> None:
        conn = self._connection()
        with conn:
            for user in users:
                existing = conn.execute(
                    "SELECT id FROM users WHERE email = ?", (user.email,)
                ).fetchone()
                if existing is None:
                    conn.execute(
                        "INSERT INTO users (name, email, password_hash, role) VALUES (?, ?, ?, ?)",
                        (user.name, user.email, hash_password(user.password), user.role),
                    )

    @staticmethod
    def _user_from_row(row: sqlite3.Row) -> User:
        return User(
            id=row["id"],
            name=row["name"],
            email=row["email"],
            role=row["role"],
            status=row["status"],
            profile_image=row["profile_image"],
        )

    def authenticate(self, email: str, password: str) -> User:
        row = self._connection().execute(
            "SELECT * FROM users WHERE email = ?", (email,)
        ).fetchone()
        if row is None or not verify_password(password, row["password_hash"]):
            raise InvalidCredentials("email or password incorrect")
        user = self._user_from_row(row)
        if not user.is_active:
            raise InactiveAccount(f"account {email} is deactivated")
        return user

    def get_user(self, user_id: int) -> User:
        row = self._connection().execute(
            "SELECT * FROM users WHERE id = ?", (user_id,)
        ).fetchone()
        if row is None:
            raise UnknownUser(f"no user with id {user_id}")
        return self._user_from_row(row)

    def list_users_with_batch_counts(self) -> list[tuple[User, int]]:
        rows = self._connection().execute(
            """
            SELECT u.*, COUNT(b.id) AS batch_count
            FROM users u LEFT JOIN batches b ON b.owner_id = u.id
            GROUP BY u.id ORDER BY u.id
            """
        ).fetchall()
        return [(self._user_from_row(row), row["batch_count"]) for row in rows]

    def update_user(
        self,
        user_id: int,
        status: Optional[str] = None,
        name: Optional[str] = None,
        role: Optional[str] = None,
    ) -> User:
        if status is not None and status not in ("Active", "Inactive"):
            raise ValueError(f"status must be Active or Inactive, got {status!r}")
        if role is not None and role not in ("Admin", "User"):
            raise ValueError(f"role must be Admin or User, got {role!r}")
        conn = self._connection()
        with conn:
            self.get_user(user_id)
            if status is not None:
                conn.execute("UPDATE users SET status = ? WHERE id = ?", (status, user_id))
            if name is not None:
                conn.execute("UPDATE users SET name = ? WHERE id = ?", (name, user_id))
            if role is not None:
                conn.execute("UPDATE users SET role = ? WHERE id = ?", (role, user_id))
        return self.get_user(user_id)

    # -- sessions ------------------------------------------------------

    def create_session(self, user_id: int) -> str:
        token = secrets.token_hex(32)
        conn = self._connection()
        with conn:
            conn.execute(
                "INSERT INTO sessions (token, user_id, created_at) VALUES (?, ?, ?)",
                (token, user_id, _now()),
            )
        return token

    def user_for_token(self, token: str) -> Optional[User]:
        row = self._connection().execute(
            """
            SELECT u.* FROM sessions s JOIN users u ON u.id = s.user_id
            WHERE s.token = ?
            """,
            (token,),
        ).fetchone()
        return self._user_from_row(row) if row is not None else None

    # -- batches -------------------------------------------------------

    @staticmethod
    def _batch_from_row(row: sqlite3.Row) -> Batch:
        return Batch(
            id=row["id"],
            batch_number=row["batch_number"],
            owner_id=row["owner_id"],
            state=row["state"],
            created_at=row["created_at"],
        )

    def create_batch(self, owner_id: int) -> Batch:
        conn = self._connection()
        try:
            with conn:
                cursor = conn.execute(
                    "INSERT INTO batches (owner_id, created_at) VALUES (?, ?)",
                    (owner_id, _now()),
                )
                batch_id = cursor.lastrowid
                # Sequence number derives from the rowid inside the same
                # transaction, so numbers are unique and gap-tolerant.
                conn.execute(
                    "UPDATE batches SET batch_number = ? WHERE id = ?",
                    (f"B-{batch_id:06d}", batch_id),
                )
        except sqlite3.IntegrityError as exc:
            raise AlreadyAssigned("caller already has an open batch") from exc
        return self.get_batch_by_id(batch_id)

    def get_batch_by_id(self, batch_id: int) -> Batch:
        row = self._connection().execute(
            "SELECT * FROM batches WHERE id = ?", (batch_id,)
        ).fetchone()
        if row is None:
            raise UnknownBatch(f"no batch with id {batch_id}")
        return self._batch_from_row(row)

    def get_batch(self, batch_number: str) -> Batch:
        row = self._connection().execute(
            "SELECT * FROM batches WHERE batch_number = ?", (batch_number,)
        ).fetchone()
        if row is None:
            raise UnknownBatch(f"no batch {batch_number}")
        return self._batch_from_row(row)

    def open_batch_for(self, owner_id: int) -> Optional[Batch]:
        row = self._connection().execute(
            "SELECT * FROM batches WHERE owner_id = ? AND state = 'Open'", (owner_id,)
        ).fetchone()
        return self._batch_from_row(row) if row is not None else None

    def close_batch(self, batch_number: str) -> Batch:
        conn = self._connection()
        with conn:
            batch = self.get_batch(batch_number)
            conn.execute("UPDATE batches SET state = 'Closed' WHERE id = ?", (batch.id,))
        return self.get_batch(batch_number)

    def list_batches(self) -> list[Batch]:
        rows = self._connection().execute("SELECT * FROM batches ORDER BY id").fetchall()
        return [self._batch_from_row(row) for row in rows]

    # -- images --------------------------------------------------------

    def store_image_bytes(self, data: bytes, suffix: str = ".png") -> Path:
        """Content-addressed write: identical bytes share one file."""
        digest = hashlib.sha256(data).hexdigest()
        directory = self.images_dir / digest[:2]
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{digest}{suffix}"
        if not path.exists():
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return path

    def add_image(
        self,
        batch_id: int,
        original_filename: str,
        stored_path: Union[Path, str],
        result_json: Optional[dict] = None,
        failure: Optional[str] = None,
    ) -> int:
        if result_json is None and failure is None:
            raise ValueError("image row needs a result or a recorded failure")
        conn = self._connection()
        with conn:
            cursor = conn.execute(
                """
                INSERT INTO batch_images
                    (batch_id, original_filename, stored_path, uploaded_at, result_json, failure)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                (
                    batch_id,
                    original_filename,
                    str(stored_path),
                    _now(),
                    json.dumps(result_json, sort_keys=True) if result_json is not None else None,
                    failure,
                ),
            )
        return cursor.lastrowid

    def batch_images(self, batch_id: int) -> list[dict]:
        rows = self._connection().execute(
            "SELECT * FROM batch_images WHERE batch_id = ? ORDER BY id", (batch_id,)
        ).fetchall()
        return [
            {
                "id": row["id"],
                "original_filename": row["original_filename"],
                "stored_path": row["stored_path"],
                "uploaded_at": row["uploaded_at"],
                "result": json.loads(row["result_json"]) if row["result_json"] else None,
                "failure": row["failure"],
            }
            for row in rows
        ]

    def batch_stats(self, batch_id: int) -> BatchStats:
        """Pure fold over persisted results; failed images are excluded."""
        defected = 0
        non_defected = 0
        per_class: dict[str, int] = {}
        for image in self.batch_images(batch_id):
            result = image["result"]
            if result is None:
                continue
            if result["overall"] == "Defective":
                defected += 1
                seen = {label for label, _ in result["defects"] if label != "NonDefective"}
                for label in seen:
                    per_class[label] = per_class.get(label, 0) + 1
            else:
                non_defected += 1
        return BatchStats(
            total_inspected=defected + non_defected,
            defected=defected,
            non_defected=non_defected,
            per_defect_class=per_class,
        )
