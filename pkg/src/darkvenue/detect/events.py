"""Swap events and their CSV form."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

IN_OUT = "In->Out"
OUT_IN = "Out->In"
_DIRECTIONS = {"in->out": IN_OUT, "in→out": IN_OUT, "in_out": IN_OUT,
               "out->in": OUT_IN, "out→in": OUT_IN, "out_in": OUT_IN}

FIELDS = ("block_number", "tx_index", "tx_hash", "pool_id", "direction", "input_amount", "output_amount",
          "gas_fee", "reserve_in", "reserve_out", "min_output", "venue_tag", "day")


class DuplicateKey(ValueError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate (block_number, tx_index) = {key}")


class EventFormatError(ValueError):
    pass


def parse_direction(s: str) -> str:
    try:
        return _DIRECTIONS[s.strip().lower()]
    except KeyError:
        raise EventFormatError(f"unknown direction {s!r}") from None


@dataclass(frozen=True)
class SwapEvent:
    """One swap.  ``reserves_before`` is ``(r_in, r_out)`` as seen by this swap's input token."""

    block_number: int
    tx_index: int
    tx_hash: str
    pool_id: str
    direction: str
    input_amount: float
    output_amount: float
    gas_fee: float = 0.0
    reserves_before: tuple[float, float] | None = None
    min_output: float | None = None
    venue_tag: str | None = None
    day: dt.date | None = None

    def __post_init__(self):
        if self.direction not in (IN_OUT, OUT_IN):
            raise EventFormatError(f"direction must be {IN_OUT} or {OUT_IN}")
        if not (self.input_amount > 0 and self.output_amount > 0):
            raise EventFormatError(f"{self.tx_hash}: amounts must be positive")
        if self.gas_fee < 0:
            raise EventFormatError(f"{self.tx_hash}: gas_fee must be nonnegative")
        if self.venue_tag not in (None, "Lit", "Dark"):
            raise EventFormatError(f"{self.tx_hash}: venue_tag must be Lit or Dark")

    @property
    def key(self) -> tuple[int, int]:
        return (self.block_number, self.tx_index)

    @property
    def is_dark(self) -> bool:
        return self.venue_tag == "Dark"

    def to_row(self) -> dict:
        r = self.reserves_before
        return {
            "block_number": self.block_number, "tx_index": self.tx_index, "tx_hash": self.tx_hash,
            "pool_id": self.pool_id, "direction": self.direction,
            "input_amount": repr(self.input_amount), "output_amount": repr(self.output_amount),
            "gas_fee": repr(self.gas_fee),
            "reserve_in": "" if r is None else repr(r[0]), "reserve_out": "" if r is None else repr(r[1]),
            "min_output": "" if self.min_output is None else repr(self.min_output),
            "venue_tag": self.venue_tag or "", "day": "" if self.day is None else self.day.isoformat(),
        }


def _opt_float(s):
    s = (s or "").strip()
    return float(s) if s else None


def event_from_row(row: dict) -> SwapEvent:
    try:
        r_in, r_out = _opt_float(row.get("reserve_in")), _opt_float(row.get("reserve_out"))
        day = (row.get("day") or row.get("timestamp_day") or "").strip()
        return SwapEvent(
            block_number=int(row["block_number"]), tx_index=int(row["tx_index"]),
            tx_hash=row.get("tx_hash") or f"{row['block_number']}:{row['tx_index']}",
            pool_id=row["pool_id"], direction=parse_direction(row["direction"]),
            input_amount=float(row["input_amount"]), output_amount=float(row["output_amount"]),
            gas_fee=_opt_float(row.get("gas_fee")) or 0.0,
            reserves_before=None if r_in is None or r_out is None else (r_in, r_out),
            min_output=_opt_float(row.get("min_output")),
            venue_tag=(row.get("venue_tag") or "").strip() or None,
            day=dt.date.fromisoformat(day) if day else None,
        )
    except KeyError as exc:
        raise EventFormatError(f"missing column {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, EventFormatError):
            raise
        raise EventFormatError(str(exc)) from None


def check_unique(events: Iterable[SwapEvent]) -> None:
    seen = set()
    for e in events:
        if e.key in seen:
            raise DuplicateKey(e.key)
        seen.add(e.key)


def load_events(path: str | Path) -> list[SwapEvent]:
    with open(path, newline="") as fh:
        events = [event_from_row(r) for r in csv.DictReader(fh)]
    check_unique(events)
    return events


def write_events(events: Iterable[SwapEvent], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for e in events:
            w.writerow(e.to_row())
