"""Append-only CSV run logs: one row per command, stage events and errors."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import traceback
import uuid
import warnings
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd

from sil import config

SENSITIVE_KEYS = {"password", "secret", "token", "api_key", "authorization"}
MAX_VALUE_LENGTH = 200

RUN_FIELDS = [
    "run_id",
    "run_ts",
    "command",
    "status",
    "exit_code",
    "latency_ms",
    "params_json",
    "metrics_json",
]

EVENT_FIELDS = [
    "event_ts",
    "run_id",
    "level",
    "stage",
    "message",
    "duration_ms",
    "meta_json",
]

ERROR_FIELDS = [
    "error_ts",
    "run_id",
    "exc_type",
    "exc_message",
    "traceback_short",
    "context_json",
]


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def default_log_dir() -> Path:
    return Path(os.getenv("SIL_LOG_DIR", config.DEFAULT_LOG_DIR))


def sanitize_meta(meta: dict) -> dict:
    sanitized: dict = {}
    for key, value in (meta or {}).items():
        if str(key).lower() in SENSITIVE_KEYS:
            continue
        if isinstance(value, dict):
            sanitized[key] = sanitize_meta(value)
        elif isinstance(value, (list, tuple)):
            sanitized[key] = [sanitize_meta(v) if isinstance(v, dict) else _truncate_value(v) for v in value]
        else:
            sanitized[key] = _truncate_value(value)
    return sanitized


def _truncate_value(value: object) -> object:
    if isinstance(value, str) and len(value) > MAX_VALUE_LENGTH:
        return f"{value[:20]}..."
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def to_json_str(payload: dict | list | None) -> str:
    safe_payload = payload if payload is not None else {}
    return json.dumps(safe_payload, ensure_ascii=False, default=str, sort_keys=True)


class CsvLogStore:
    def __init__(self, base_dir: str | Path | None = None):
        self.base_dir = Path(base_dir) if base_dir is not None else default_log_dir()
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.files = {
            "runs": self.base_dir / "runs.csv",
            "events": self.base_dir / "events.csv",
            "errors": self.base_dir / "errors.csv",
        }

    def append_run(self, row: dict) -> None:
        self._append("runs", RUN_FIELDS, row)

    def append_event(self, row: dict) -> None:
        self._append("events", EVENT_FIELDS, row)

    def append_error(self, row: dict) -> None:
        self._append("errors", ERROR_FIELDS, row)

    def read_csv(self, name: str) -> pd.DataFrame:
        file_path = self.files.get(name)
        if not file_path or not file_path.exists():
            return pd.DataFrame()
        df = pd.read_csv(file_path)
        if name == "runs" and "run_ts" in df.columns:
            df["run_ts"] = pd.to_datetime(df["run_ts"], utc=True, errors="coerce")
        return df

    def _append(self, name: str, fields: list[str], row: dict) -> None:
        file_path = self.files[name]
        payload = {field: row.get(field) for field in fields}
        file_exists = file_path.exists()
        with file_path.open("a", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=fields)
            if not file_exists:
                writer.writeheader()
            writer.writerow(payload)


class RunLogger:
    """Binds one command invocation to a run id inside a ``CsvLogStore``."""

    def __init__(self, store: CsvLogStore, command: str, params: dict | None = None):
        self.store = store
        self.command = command
        self.params = params or {}
        self.run_id = str(uuid.uuid4())
        self._started = time.perf_counter()

    def event(self, level: str, stage: str, message: str, duration_ms: int | None = None, meta: dict | None = None) -> None:
        self.store.append_event(
            {
                "event_ts": utc_now_iso(),
                "run_id": self.run_id,
                "level": level,
                "stage": stage,
                "message": message,
                "duration_ms": duration_ms,
                "meta_json": to_json_str(sanitize_meta(meta or {})),
            }
        )

    def error(self, exc: BaseException, context: dict | None = None) -> None:
        lines = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)).splitlines()
        self.store.append_error(
            {
                "error_ts": utc_now_iso(),
                "run_id": self.run_id,
                "exc_type": type(exc).__name__,
                "exc_message": str(exc),
                "traceback_short": "\n".join(lines[-30:])[-4000:],
                "context_json": to_json_str(sanitize_meta({"command": self.command, **(context or {})})),
            }
        )

    def finish(self, status: str, exit_code: int, metrics: dict | None = None) -> None:
        self.store.append_run(
            {
                "run_id": self.run_id,
                "run_ts": utc_now_iso(),
                "command": self.command,
                "status": status,
                "exit_code": exit_code,
                "latency_ms": int((time.perf_counter() - self._started) * 1000),
                "params_json": to_json_str(sanitize_meta(self.params)),
                "metrics_json": to_json_str(sanitize_meta(metrics or {})),
            }
        )

    @contextmanager
    def stage(self, name: str, message: str, meta: dict | None = None) -> Iterator[None]:
        """Log a stage with its duration; warnings raised inside become WARN events."""
        started = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                yield
            finally:
                for item in caught:
                    self.event("WARN", name, str(item.message), meta={"category": item.category.__name__})
        self.event("INFO", name, message, duration_ms=int((time.perf_counter() - started) * 1000), meta=meta)
