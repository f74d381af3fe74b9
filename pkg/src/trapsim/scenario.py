"""Scenario files: oracle bindings, stage budget and mode.

Scenarios are YAML documents::

    name: collision
    mode: scripted          # or: enumeration
    stages: 60
    horizon: 50             # optional, used by the equivalence check
    slots:
      - slot: R l=0         # "R l=4 m=1 k=1" is accepted when m,k match
        delta: [[a, x, steps], ...]
        Phi: [[x, y, steps], ...]
      - slot: D n=0
        phi: [[x, y, steps]]

Unbound slots get everywhere-divergent oracles in scripted mode.  In
enumeration mode no slots may be bound: ``phi_n``, ``Delta_j`` and ``Phi_k``
are the programs with those codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .oracle import DIVERGENT, PartialFn, ScriptedFn
from .requirements import RequirementId

MODES = ("scripted", "enumeration")
SLOT_TABLES = {"D": ("phi",), "R": ("delta", "Phi")}


class ScenarioError(ValueError):
    """Scenario parse or validation failure; the message carries the location."""


@dataclass(frozen=True)
class Scenario:
    mode: str = "scripted"
    stages: int = 0
    # priority index -> oracle name -> table
    bindings: dict[int, dict[str, ScriptedFn]] = field(default_factory=dict)
    horizon: Optional[int] = None
    name: str = ""

    def with_stages(self, stages: int) -> "Scenario":
        if stages < 0:
            raise ScenarioError(f"stage budget must be >= 0, got {stages}")
        return replace(self, stages=stages)

    def table(self, priority: int, name: str) -> Optional[ScriptedFn]:
        return self.bindings.get(priority, {}).get(name)

    def to_dict(self) -> dict[str, Any]:
        slots = []
        for p in sorted(self.bindings):
            slot: dict[str, Any] = {"slot": _slot_label(RequirementId.of(p))}
            for name, fn in sorted(self.bindings[p].items()):
                slot[name] = [[x, y, t] for x, (y, t) in sorted(fn.entries.items())]
            slots.append(slot)
        out: dict[str, Any] = {"name": self.name, "mode": self.mode, "stages": self.stages, "slots": slots}
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out

    @classmethod
    def from_dict(cls, data: Any, source: str = "<scenario>") -> "Scenario":
        """Rebuild from :meth:`to_dict` output; a budget override may leave slots above it."""
        return _validate(data, source, None, strict=False)

    def oracles(self) -> "Oracles":
        return Oracles(self)


def _slot_label(rid: RequirementId) -> str:
    if rid.is_d:
        return f"D n={rid.n}"
    return f"R l={rid.l} m={rid.m} k={rid.k}"


class Oracles:
    """Resolves the partial functions each requirement consults."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._machines: dict[int, PartialFn] = {}
        self._scripted: dict[tuple[int, str], PartialFn] = {}

    def _machine(self, code: int) -> PartialFn:
        fn = self._machines.get(code)
        if fn is None:
            fn = self._machines[code] = PartialFn.machine(code)
        return fn

    def _bound(self, priority: int, name: str) -> PartialFn:
        key = (priority, name)
        fn = self._scripted.get(key)
        if fn is None:
            table = self.scenario.table(priority, name)
            fn = DIVERGENT if table is None else PartialFn(table)
            self._scripted[key] = fn
        return fn

    def phi(self, rid: RequirementId) -> PartialFn:
        if self.scenario.mode == "enumeration":
            return self._machine(rid.n)
        return self._bound(rid.priority, "phi")

    def delta(self, rid: RequirementId) -> PartialFn:
        if self.scenario.mode == "enumeration":
            return self._machine(rid.j)
        return self._bound(rid.priority, "delta")

    def Phi(self, rid: RequirementId) -> PartialFn:
        if self.scenario.mode == "enumeration":
            return self._machine(rid.k)
        return self._bound(rid.priority, "Phi")


def parse_slot(text: str) -> RequirementId:
    parts = str(text).split()
    if not parts or parts[0] not in SLOT_TABLES:
        raise ValueError(f"slot must look like 'D n=0' or 'R l=0', got {text!r}")
    try:
        fields = dict(part.split("=", 1) for part in parts[1:])
        values = {key: int(val) for key, val in fields.items()}
    except ValueError:
        raise ValueError(f"malformed slot {text!r}") from None
    if any(v < 0 for v in values.values()):
        raise ValueError(f"slot {text!r} has a negative index")
    if parts[0] == "D":
        if set(values) != {"n"}:
            raise ValueError(f"D slot takes exactly n=..., got {text!r}")
        return RequirementId.d(values["n"])
    if "l" not in values or not set(values) <= {"l", "m", "k", "i", "j"}:
        raise ValueError(f"R slot takes l=... and optionally m,k,i,j, got {text!r}")
    rid = RequirementId.r(values["l"])
    for key, val in values.items():
        if getattr(rid, key) != val:
            raise ValueError(f"slot {text!r}: {key}={val} but l={rid.l} decodes to {key}={getattr(rid, key)}")
    return rid


def _locate(root, path: tuple) -> str:
    """Line/column of the YAML node at ``path`` (keys and indices), best effort."""
    node = root
    for step in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == step), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(step, int) and step < len(node.value):
            nxt = node.value[step]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    if node is None:
        return ""
    mark = node.start_mark
    return f":{mark.line + 1}:{mark.column + 1}"


def _fail(source, root, path, message):
    where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")
    loc = _locate(root, path) if root is not None else ""
    raise ScenarioError(f"{source}{loc}: {where + ': ' if where else ''}{message}")


def _is_nat(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def _validate(data, source, root, strict=True) -> Scenario:
    if not isinstance(data, dict):
        _fail(source, root, (), "scenario must be a mapping")
    unknown = set(data) - {"name", "mode", "stages", "horizon", "slots"}
    if unknown:
        _fail(source, root, (sorted(unknown)[0],), "unknown key")
    mode = data.get("mode", "scripted")
    if mode not in MODES:
        _fail(source, root, ("mode",), f"mode must be one of {MODES}, got {mode!r}")
    stages = data.get("stages")
    if not _is_nat(stages):
        _fail(source, root, ("stages",), f"stages must be a natural number, got {stages!r}")
    horizon = data.get("horizon")
    if horizon is not None and not _is_nat(horizon):
        _fail(source, root, ("horizon",), f"horizon must be a natural number, got {horizon!r}")
    name = data.get("name", "")
    if not isinstance(name, str):
        _fail(source, root, ("name",), "name must be a string")
    slots = data.get("slots") or []
    if not isinstance(slots, list):
        _fail(source, root, ("slots",), "slots must be a list")
    if slots and mode == "enumeration":
        _fail(source, root, ("slots",), "enumeration mode takes no bindings")

    bindings: dict[int, dict[str, ScriptedFn]] = {}
    for i, slot in enumerate(slots):
        if not isinstance(slot, dict) or "slot" not in slot:
            _fail(source, root, ("slots", i), "each slot needs a 'slot' key")
        try:
            rid = parse_slot(slot["slot"])
        except ValueError as exc:
            _fail(source, root, ("slots", i, "slot"), str(exc))
        if rid.priority in bindings:
            _fail(source, root, ("slots", i, "slot"), f"{rid} bound twice")
        if strict and rid.priority >= stages:
            _fail(source, root, ("slots", i, "slot"), f"{rid} has priority {rid.priority} >= stages {stages}")
        allowed = SLOT_TABLES[rid.kind]
        tables = {}
        for key, rows in slot.items():
            if key == "slot":
                continue
            if key not in allowed:
                _fail(source, root, ("slots", i, key), f"{rid.kind} slots bind only {allowed}")
            tables[key] = _table(rows, source, root, ("slots", i, key))
        bindings[rid.priority] = tables
    return Scenario(mode=mode, stages=stages, bindings=bindings, horizon=horizon, name=name)


def _table(rows, source, root, path) -> ScriptedFn:
    if not isinstance(rows, list):
        _fail(source, root, path, "expected a list of [x, y, steps] triples")
    entries = {}
    for j, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == 3 and all(_is_nat(v) for v in row)):
            _fail(source, root, path + (j,), f"expected [x, y, steps] of naturals, got {row!r}")
        x, y, t = row
        if x in entries:
            _fail(source, root, path + (j,), f"input {x} listed twice")
        entries[x] = (y, t)
    return ScriptedFn(entries)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f":{mark.line + 1}:{mark.column + 1}" if mark else ""
        raise ScenarioError(f"{source}{loc}: {getattr(exc, 'problem', None) or exc}") from None
    return _validate(data, source, root)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario: {exc.strerror}") from None
    return parse_scenario(text, str(path))
