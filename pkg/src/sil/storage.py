"""SQLite persistence for Monte Carlo replication records."""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

import pandas as pd

RECORD_COLUMNS = [
    "campaign_id",
    "cell",
    "t",
    "rep",
    "phase",
    "status",
    "penalty_json",
    "metrics_json",
    "links_json",
    "error",
]


class CampaignStore:
    """Replication records keyed by (campaign, cell, replication).

    ``path=":memory:"`` keeps everything in one in-process connection; a file
    path makes a campaign resumable across runs.
    """

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._connection = sqlite3.connect(self.path, check_same_thread=False)
        self.init_db()

    def close(self) -> None:
        self._connection.close()

    def __enter__(self) -> "CampaignStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def init_db(self) -> None:
        with self._connection as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS records (
                  campaign_id TEXT,
                  cell INTEGER,
                  t INTEGER,
                  rep INTEGER,
                  phase TEXT,
                  status TEXT,
                  penalty_json TEXT,
                  metrics_json TEXT,
                  links_json TEXT,
                  error TEXT,
                  UNIQUE(campaign_id, cell, rep)
                )
                """
            )
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS cells (
                  campaign_id TEXT,
                  cell INTEGER,
                  t INTEGER,
                  frozen_penalty_json TEXT,
                  UNIQUE(campaign_id, cell)
                )
                """
            )

    def save_record(self, record: dict) -> None:
        row = (
            record["campaign_id"],
            int(record["cell"]),
            int(record["t"]),
            int(record["rep"]),
            record["phase"],
            record["status"],
            json.dumps(record.get("penalty")),
            json.dumps(record.get("metrics"), sort_keys=True),
            json.dumps(record.get("links")),
            record.get("error"),
        )
        with self._connection as conn:
            conn.execute(
                f"""
                INSERT OR REPLACE INTO records({", ".join(RECORD_COLUMNS)})
                VALUES ({", ".join("?" * len(RECORD_COLUMNS))})
                """,
                row,
            )

    def load_records(self, campaign_id: str, cell: int | None = None) -> list[dict]:
        query = f"SELECT {', '.join(RECORD_COLUMNS)} FROM records WHERE campaign_id=?"
        params: tuple = (campaign_id,)
        if cell is not None:
            query += " AND cell=?"
            params += (int(cell),)
        query += " ORDER BY cell ASC, rep ASC"
        frame = pd.read_sql_query(query, self._connection, params=params)
        records = []
        for row in frame.to_dict(orient="records"):
            records.append(
                {
                    "campaign_id": row["campaign_id"],
                    "cell": int(row["cell"]),
                    "t": int(row["t"]),
                    "rep": int(row["rep"]),
                    "phase": row["phase"],
                    "status": row["status"],
                    "penalty": json.loads(row["penalty_json"]),
                    "metrics": json.loads(row["metrics_json"]),
                    "links": json.loads(row["links_json"]),
                    "error": row["error"] if isinstance(row["error"], str) else None,
                }
            )
        return records

    def save_frozen_penalty(self, campaign_id: str, cell: int, t: int, penalty: list[float] | None) -> None:
        with self._connection as conn:
            conn.execute(
                "INSERT OR REPLACE INTO cells(campaign_id, cell, t, frozen_penalty_json) VALUES (?, ?, ?, ?)",
                (campaign_id, int(cell), int(t), json.dumps(penalty)),
            )

    def load_frozen_penalty(self, campaign_id: str, cell: int) -> list[float] | None:
        cursor = self._connection.execute(
            "SELECT frozen_penalty_json FROM cells WHERE campaign_id=? AND cell=?",
            (campaign_id, int(cell)),
        )
        row = cursor.fetchone()
        return None if row is None else json.loads(row[0])

    def has_frozen_penalty(self, campaign_id: str, cell: int) -> bool:
        cursor = self._connection.execute(
            "SELECT 1 FROM cells WHERE campaign_id=? AND cell=?",
            (campaign_id, int(cell)),
        )
        return cursor.fetchone() is not None

    def export_jsonl(self, campaign_id: str, path: str | Path) -> Path:
        file_path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with file_path.open("w", encoding="utf-8", newline="\n") as handle:
            for record in self.load_records(campaign_id):
                handle.write(json.dumps(record, sort_keys=True) + "\n")
        return file_path
