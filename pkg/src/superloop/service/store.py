"""Append-only JSON-lines persistence for loop records."""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass(frozen=True)
class LoopRecord:
    id: str
    loop: dict          # Loop JSON
    created_at: float
    parent_id: Optional[str]
    seed: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "loop": self.loop,
            "created_at": self.created_at,
            "parent_id": self.parent_id,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict) -> "LoopRecord":
        return LoopRecord(
            id=doc["id"],
            loop=doc["loop"],
            created_at=float(doc["created_at"]),
            parent_id=doc.get("parent_id"),
            seed=int(doc["seed"]),
        )


class LoopStore:
    """JSONL-backed record store with an in-memory index.

    Appends go through a single lock; reads are lock-free against the
    immutable records already indexed.
    """

    def __init__(self, directory: Optional[str] = None):
        self._records: dict[str, LoopRecord] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._path: Optional[Path] = None
        if directory is not None:
            directory = Path(directory)
            directory.mkdir(parents=True, exist_ok=True)
            self._path = directory / "loops.jsonl"
            if self._path.exists():
                with open(self._path) as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        record = LoopRecord.from_json(json.loads(line))
                        self._records[record.id] = record
                        self._order.append(record.id)

    def add(self, loop_json: dict, seed: int, parent_id: Optional[str] = None) -> LoopRecord:
        with self._lock:
            if parent_id is not None and parent_id not in self._records:
                raise KeyError(f"unknown parent record {parent_id}")
            record = LoopRecord(
                id=uuid.uuid4().hex[:12],
                loop=loop_json,
                created_at=time.time(),
                parent_id=parent_id,
                seed=seed,
            )
            self._records[record.id] = record
            self._order.append(record.id)
            if self._path is not None:
                with open(self._path, "a") as fh:
                    fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
            return record

    def get(self, record_id: str) -> Optional[LoopRecord]:
        return self._records.get(record_id)

    def list(self, offset: int = 0, limit: int = 50) -> tuple[list[LoopRecord], int]:
        ids = self._order[offset:offset + limit]
        return [self._records[i] for i in ids], len(self._order)

    def __len__(self) -> int:
        return len(self._order)
