"""Events and the line-oriented trace file format.

A trace file starts with two header lines and then holds one event per line::

    # trace v1
    # scenario {"mode": "scripted", ...}
    0 0 engine begin
    1 0 D:n=0 visit
    2 0 D:n=0 witness x=1

Each event line is ``seq stage author kind`` followed by the payload fields
of that kind as ``name=value`` in the fixed order of :data:`SCHEMA`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, NamedTuple, Union

FORMAT_LINE = "# trace v1"
SCENARIO_PREFIX = "# scenario "

FILLER = "filler"
ENGINE = "engine"

SCHEMA: dict[str, tuple[str, ...]] = {
    "begin": (),
    "visit": (),
    # D_n
    "witness": ("x",),
    "eval_phi": ("x", "y"),
    # R_l
    "bait": ("v", "a"),
    "trap": ("b",),
    "eval_delta": ("v", "a", "x"),
    "eval_Phi": ("v", "x", "y"),
    "collision": ("v", "u"),
    "loop": ("v",),
    "exit": ("v", "y", "c", "member"),
    # shared primitive updates
    "state": ("state", "v"),
    "enumerate": ("x",),
    "define_theta": ("m", "key", "val"),
    "define_lambda": ("m", "key", "val"),
    "freeze": ("m", "z", "owner"),
    "unfreeze": ("m", "z", "owner"),
    "satisfied": ("branch",),
    "initialize_lower": (),
    "initialize": ("target",),
    # totality filler
    "fill1": ("m", "z"),
    "fill2a": ("m", "z", "y"),
    "fill2b": ("m", "z", "x"),
}

ORACLE_EVENTS = {"eval_phi": ("x", "y"), "eval_delta": ("a", "x"), "eval_Phi": ("x", "y")}


class TraceFormatError(ValueError):
    pass


class Event(NamedTuple):
    seq: int
    stage: int
    author: str
    kind: str
    values: tuple[int, ...]

    def field(self, name: str) -> int:
        return self.values[SCHEMA[self.kind].index(name)]

    def asdict(self) -> dict[str, int]:
        return dict(zip(SCHEMA[self.kind], self.values))


def format_event(ev: Event) -> str:
    names = SCHEMA[ev.kind]
    if len(names) != len(ev.values):
        raise TraceFormatError(f"event {ev.seq}: {ev.kind} expects {len(names)} fields, got {len(ev.values)}")
    head = f"{ev.seq} {ev.stage} {ev.author} {ev.kind}"
    if not names:
        return head
    return head + " " + " ".join(f"{n}={v}" for n, v in zip(names, ev.values))


def parse_event(line: str, lineno: int = 0) -> Event:
    parts = line.split()
    where = f"line {lineno}" if lineno else "event"
    if len(parts) < 4:
        raise TraceFormatError(f"{where}: expected 'seq stage author kind ...', got {line!r}")
    seq_s, stage_s, author, kind = parts[:4]
    if kind not in SCHEMA:
        raise TraceFormatError(f"{where}: unknown event kind {kind!r}")
    names = SCHEMA[kind]
    fields = parts[4:]
    if len(fields) != len(names):
        raise TraceFormatError(f"{where}: {kind} expects fields {names}, got {fields}")
    values = []
    for name, item in zip(names, fields):
        key, sep, raw = item.partition("=")
        if key != name or not sep:
            raise TraceFormatError(f"{where}: expected field {name}=..., got {item!r}")
        values.append(_nat(raw, where))
    return Event(_nat(seq_s, where), _nat(stage_s, where), author, kind, tuple(values))


def _nat(raw: str, where: str) -> int:
    if not raw.isdigit():
        raise TraceFormatError(f"{where}: {raw!r} is not a natural number")
    return int(raw)


def render(scenario: dict, events: Iterable[Event]) -> str:
    lines = [FORMAT_LINE, SCENARIO_PREFIX + json.dumps(scenario, sort_keys=True, separators=(",", ":"))]
    lines.extend(format_event(ev) for ev in events)
    return "\n".join(lines) + "\n"


def write_trace(path: Union[str, Path], scenario: dict, events: Iterable[Event]) -> None:
    # newline="\n" keeps the bytes identical across platforms
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render(scenario, events))


def parse_trace(text: str) -> tuple[dict, list[Event]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise TraceFormatError(f"line 1: missing {FORMAT_LINE!r} header")
    if len(lines) < 2 or not lines[1].startswith(SCENARIO_PREFIX):
        raise TraceFormatError("line 2: missing scenario header")
    try:
        scenario = json.loads(lines[1][len(SCENARIO_PREFIX):])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line 2: bad scenario JSON: {exc}") from None
    events = [parse_event(line, n) for n, line in enumerate(lines[2:], 3) if line.strip()]
    return scenario, events


def read_trace(path: Union[str, Path]) -> tuple[dict, list[Event]]:
    return parse_trace(Path(path).read_text(encoding="utf-8"))
