#!/usr/bin/env python3
"""Export campaign replication records from a SQLite store to CSV."""

import json
import sqlite3
import sys
from pathlib import Path

import pandas as pd

if len(sys.argv) < 2:
    print("usage: export_data.py STORE.sqlite [OUT_DIR]")
    sys.exit(2)

db = Path(sys.argv[1])
out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(".")

if not db.exists():
    print(f"Store not found at {db}")
    print("Run `sil campaign CONFIG --store PATH` first.")
    sys.exit(1)

conn = sqlite3.connect(db)
records = pd.read_sql_query(
    "SELECT campaign_id, cell, t, rep, phase, status, penalty_json, metrics_json, error "
    "FROM records ORDER BY campaign_id, cell, rep",
    conn,
)
cells = pd.read_sql_query("SELECT campaign_id, cell, t, frozen_penalty_json FROM cells ORDER BY campaign_id, cell", conn)
conn.close()

# one column per recovery metric; failed replications keep empty metric cells
metrics = records["metrics_json"].map(lambda s: json.loads(s) or {}).apply(pd.Series)
records = pd.concat([records.drop(columns=["metrics_json"]), metrics], axis=1)

out_dir.mkdir(parents=True, exist_ok=True)
records.to_csv(out_dir / "records.csv", index=False)
cells.to_csv(out_dir / "cells.csv", index=False)

print(f"Exported: {len(records)} records across {len(cells)} cells")
