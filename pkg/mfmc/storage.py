"""
SQLite run ledger for mfmc.
DB lives at ~/.mfmc/runs.db; every `--record`ed command appends one row.
"""

import hashlib
import json
import logging
import os
import sqlite3
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Optional

log = logging.getLogger(__name__)

# Allow test harnesses to redirect the DB via env var
_db_dir_override = os.environ.get("MFMC_DB_DIR")
DB_DIR = Path(_db_dir_override) if _db_dir_override else Path.home() / ".mfmc"
DB_PATH = DB_DIR / "runs.db"

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id           INTEGER PRIMARY KEY AUTOINCREMENT,
    command      TEXT NOT NULL,
    scenario     TEXT NOT NULL,
    created_at   TEXT NOT NULL,
    seed         TEXT,           -- unsigned 64-bit, beyond SQLite INTEGER
    particles    INTEGER,
    partitions   INTEGER,
    output_path  TEXT,
    output_hash  TEXT,
    summary      TEXT DEFAULT '{}'
);

CREATE INDEX IF NOT EXISTS idx_runs_scenario ON runs(scenario);
"""


@dataclass
class RunRecord:
    command: str
    scenario: str
    created_at: str
    seed: Optional[int] = None
    particles: Optional[int] = None
    partitions: Optional[int] = None
    output_path: Optional[str] = None
    output_hash: Optional[str] = None
    summary: Optional[Dict] = None
    id: Optional[int] = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def ensure_db() -> None:
    """Create the DB directory and initialize schema if needed."""
    DB_DIR.mkdir(parents=True, exist_ok=True)
    with sqlite3.connect(DB_PATH) as conn:
        conn.executescript(SCHEMA)
        conn.commit()


@contextmanager
def get_conn() -> Iterator[sqlite3.Connection]:
    """Context manager yielding a SQLite connection with row_factory set."""
    ensure_db()
    conn = sqlite3.connect(DB_PATH)
    conn.row_factory = sqlite3.Row
    conn.execute("PRAGMA journal_mode=WAL")
    try:
        yield conn
        conn.commit()
    except Exception:
        conn.rollback()
        raise
    finally:
        conn.close()


def file_hash(path: Path) -> str:
    """First 16 hex digits of the file's sha256."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()[:16]


def record_run(
    command: str,
    scenario: str,
    output_path: Optional[Path] = None,
    seed: Optional[int] = None,
    particles: Optional[int] = None,
    partitions: Optional[int] = None,
    summary: Optional[Dict] = None,
) -> RunRecord:
    record = RunRecord(
        command=command,
        scenario=scenario,
        created_at=_now(),
        seed=seed,
        particles=particles,
        partitions=partitions,
        output_path=str(output_path) if output_path is not None else None,
        output_hash=file_hash(output_path) if output_path is not None and Path(output_path).is_file() else None,
        summary=summary or {},
    )
    with get_conn() as conn:
        cur = conn.execute(
            """
            INSERT INTO runs (command, scenario, created_at, seed, particles, partitions,
                              output_path, output_hash, summary)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
            """,
            (
                record.command,
                record.scenario,
                record.created_at,
                None if record.seed is None else str(record.seed),
                record.particles,
                record.partitions,
                record.output_path,
                record.output_hash,
                serialize(record.summary),
            ),
        )
        record.id = cur.lastrowid
    log.info("Recorded %s run of %s as #%d", command, scenario, record.id)
    return record


def list_runs(limit: Optional[int] = None, scenario: Optional[str] = None) -> List[RunRecord]:
    """Recorded runs, newest first."""
    sql = "SELECT * FROM runs"
    params: list = []
    if scenario is not None:
        sql += " WHERE scenario = ?"
        params.append(scenario)
    sql += " ORDER BY id DESC"
    if limit is not None:
        sql += " LIMIT ?"
        params.append(limit)
    with get_conn() as conn:
        rows = conn.execute(sql, params).fetchall()
    return [_row_to_record(r) for r in rows]


def serialize(obj) -> str:
    return json.dumps(obj, default=str, sort_keys=True)


def deserialize(s: str):
    if s is None:
        return {}
    return json.loads(s)


def _row_to_record(row: sqlite3.Row) -> RunRecord:
    seed = row["seed"]
    return RunRecord(
        id=row["id"],
        command=row["command"],
        scenario=row["scenario"],
        created_at=row["created_at"],
        seed=int(seed) if seed is not None else None,
        particles=row["particles"],
        partitions=row["partitions"],
        output_path=row["output_path"],
        output_hash=row["output_hash"],
        summary=deserialize(row["summary"]),
    )
