"""Embedded SQL execution engine.

Wraps sqlite3 with the small set of warehouse-style affordances the rest
of the pipeline needs: a TO_CHAR date formatter, read-only statement
execution with a wall-clock timeout, and introspection-friendly access to
the underlying connection.
"""

from __future__ import annotations

import re
import sqlite3
import threading
import time
from pathlib import Path

from .errors import ExecutionTimeout


_FMT_CODES = {
    "YYYY": lambda d: f"{d[0]:04d}",
    "YY": lambda d: f"{d[0] % 100:02d}",
    "MM": lambda d: f"{d[1]:02d}",
    "DD": lambda d: f"{d[2]:02d}",
    "Q": lambda d: str((d[1] - 1) // 3 + 1),
}
_FMT_PATTERN = re.compile(r'"[^"]*"|YYYY|YY|MM|DD|Q')
_DATE_PATTERN = re.compile(r"^(\d{4})-(\d{2})-(\d{2})")


def to_char(value, fmt) -> str | None:
    """Format an ISO date/timestamp string with Oracle-style codes.

    Supports YYYY, YY, MM, DD, Q and double-quoted literal segments, e.g.
    TO_CHAR(d, 'YYYY"Q"Q') renders 2023-05-01 as 2023Q2.
    """
    if value is None or fmt is None:
        return None
    match = _DATE_PATTERN.match(str(value))
    if not match:
        return str(value)
    date = tuple(int(g) for g in match.groups())

    def repl(m: re.Match) -> str:
        piece = m.group(0)
        if piece.startswith('"'):
            return piece[1:-1]
        return _FMT_CODES[piece](date)

    return _FMT_PATTERN.sub(repl, str(fmt))


class Database:
    """A sqlite-backed engine with TO_CHAR and per-statement timeouts."""

    def __init__(self, path: str | Path = ":memory:", timeout_s: float = 15.0):
        self.path = str(path)
        self.timeout_s = timeout_s
        # one statement at a time; the lock makes the handle thread-safe
        self._lock = threading.Lock()
        self.connection = sqlite3.connect(self.path, check_same_thread=False)
        self.connection.create_function("TO_CHAR", 2, to_char, deterministic=True)

    def close(self) -> None:
        self.connection.close()

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def executescript(self, script: str) -> None:
        """Run a DDL/seed script (no timeout, not for query traffic)."""
        with self._lock:
            self.connection.executescript(script)
            self.connection.commit()

    def run_select(self, sql: str, timeout_s: float | None = None):
        """Execute one SELECT and return (column_names, rows).

        Raises sqlite3.Error subclasses unchanged so callers can present
        the engine's own message, and ExecutionTimeout past the deadline.
        """
        budget = self.timeout_s if timeout_s is None else timeout_s
        with self._lock:
            deadline = time.monotonic() + budget

            def tick():
                return 1 if time.monotonic() > deadline else 0

            self.connection.set_progress_handler(tick, 10_000)
            try:
                cursor = self.connection.execute(sql)
                rows = cursor.fetchall()
                columns = [d[0] for d in cursor.description] if cursor.description else []
                return columns, rows
            except sqlite3.OperationalError as exc:
                if "interrupted" in str(exc):
                    raise ExecutionTimeout(f"statement exceeded {budget:.1f}s") from exc
                raise
            finally:
                self.connection.set_progress_handler(None, 0)
