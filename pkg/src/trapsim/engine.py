"""The stage protocol: visit requirements in priority order, then fill.

At stage ``s`` the requirements with priority ``0..s`` are visited in order.
Each visit applies its update block atomically before the next requirement
runs.  After all visits the totality filler scans every ``(m, z)`` with
``m, z <= s`` in lexicographic order.  Every applied update becomes one
:class:`~trapsim.trace.Event`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .coding import FreshAllocator, Trap, classify, decode_trap
from .requirements import (
    DLocal,
    RequirementId,
    RequirementState,
    initialize,
    pristine,
    visit_d,
    visit_r,
)
from .scenario import Oracles, Scenario
from .targets import ConstructionError, FreezeRegistry, TargetSpace
from .trace import ENGINE, FILLER, SCHEMA, Event

FILL1, FILL2A, FILL2B = 1, 2, 4


class RunAborted(RuntimeError):
    """A hard failure stopped the run; ``state`` holds the trace up to it."""

    def __init__(self, cause: Exception, state: "EngineState"):
        super().__init__(f"run aborted at stage {state.stage}: {cause}")
        self.cause = cause
        self.state = state


class _Window:
    """Dense boolean mirrors of the maps over ``m, z < size`` for the filler scan."""

    def __init__(self, size: int):
        self.size = 0
        self.theta_def = np.zeros((0, 0), dtype=np.bool_)
        self.lambda_def = np.zeros((0, 0), dtype=np.bool_)
        self.frozen = np.zeros((0, 0), dtype=np.bool_)
        self.trap_m = np.zeros(0, dtype=np.int64)
        self.grow(size)

    def grow(self, size: int) -> None:
        if size <= self.size:
            return
        size = max(size, 2 * self.size)
        for name in ("theta_def", "lambda_def", "frozen"):
            old = getattr(self, name)
            new = np.zeros((size, size), dtype=np.bool_)
            new[: old.shape[0], : old.shape[1]] = old
            setattr(self, name, new)
        trap_m = np.full(size, -1, dtype=np.int64)
        trap_m[: self.size] = self.trap_m
        for z in range(self.size, size):
            hit = decode_trap(z)
            if hit is not None:
                trap_m[z] = hit[0]
        self.trap_m = trap_m
        self.size = size

    def mark(self, grid: str, m: int, z: int, value: bool = True) -> None:
        if m < self.size and z < self.size:
            getattr(self, grid)[m, z] = value


@dataclass
class EngineState:
    scenario: Scenario
    stage: int = 0
    A: dict[int, int] = field(default_factory=dict)  # element -> entry stage
    targets: dict[int, TargetSpace] = field(default_factory=dict)
    freezes: FreezeRegistry = field(default_factory=FreezeRegistry)
    reqs: dict[int, RequirementState] = field(default_factory=dict)
    alloc: FreshAllocator = field(default_factory=FreshAllocator)
    trace: list[Event] = field(default_factory=list)
    use_numba: Optional[bool] = None

    def __post_init__(self):
        self.oracles: Oracles = self.scenario.oracles()
        self.window = _Window(max(self.scenario.stages, 1))

    # read-only view handed to the requirement routines

    def space(self, m: int) -> TargetSpace:
        sp = self.targets.get(m)
        if sp is None:
            sp = self.targets[m] = TargetSpace(m)
        return sp

    def theta(self, m: int, key: int) -> Optional[int]:
        sp = self.targets.get(m)
        return None if sp is None else sp.theta.get(key)

    def lam(self, m: int, key: int) -> Optional[int]:
        sp = self.targets.get(m)
        return None if sp is None else sp.lam.get(key)

    def is_frozen(self, m: int, z: int) -> bool:
        return self.freezes.is_frozen(m, z)

    def in_a(self, x: int) -> bool:
        return x in self.A

    # event emission and primitive updates

    def emit(self, author: str, kind: str, *values: int) -> None:
        if len(values) != len(SCHEMA[kind]):
            raise ConstructionError(f"{kind} expects {len(SCHEMA[kind])} fields, got {values}")
        self.alloc.observe(*values)
        self.trace.append(Event(len(self.trace), self.stage, author, kind, tuple(values)))

    def _define(self, which: str, m: int, key: int, val: int, author: str) -> None:
        sp = self.space(m)
        wmap = sp.theta if which == "theta" else sp.lam
        wmap.define(key, val, self.stage, author)
        self.window.mark("theta_def" if which == "theta" else "lambda_def", m, key)

    def apply(self, rid: RequirementId, update: tuple) -> None:
        kind, *values = update
        author = str(rid)
        if kind == "initialize_lower":
            self.emit(author, kind)
            self._initialize_lower(rid)
            return
        if kind == "define_theta":
            self._define("theta", *values, author)
        elif kind == "define_lambda":
            self._define("lambda", *values, author)
        elif kind == "freeze":
            m, z, owner = values
            self.freezes.freeze(m, z, owner)
            self.window.mark("frozen", m, z)
        elif kind == "unfreeze":
            m, z, owner = values
            self.freezes.unfreeze(m, z, owner)
            self.window.mark("frozen", m, z, False)
        elif kind == "enumerate":
            # set semantics: the first entry stage is kept
            self.A.setdefault(values[0], self.stage)
        self.emit(author, kind, *values)

    def _initialize_lower(self, rid: RequirementId) -> None:
        author = str(rid)
        for q in sorted(self.reqs):
            if not rid.priority < q <= self.stage:
                continue
            target = RequirementId.of(q)
            local = self.reqs[q]
            if local == pristine(target):
                continue
            fresh_local, updates = initialize(local, target)
            self.emit(author, "initialize", q)
            for kind, m, z, owner in updates:
                self.freezes.unfreeze(m, z, owner)
                self.window.mark("frozen", m, z, False)
                self.emit(author, kind, m, z, owner)
            self.reqs[q] = fresh_local

    # the protocol

    def visit(self, p: int) -> None:
        rid = RequirementId.of(p)
        local = self.reqs.get(p)
        if local is None:
            local = self.reqs[p] = pristine(rid)
        if local.satisfied:
            return
        self.emit(str(rid), "visit")
        s = self.stage
        if rid.is_d:
            new, updates = visit_d(local, self.oracles.phi(rid), s, self.alloc)
        else:
            new, updates = visit_r(
                local, rid, self.oracles.delta(rid), self.oracles.Phi(rid), self, s, self.alloc
            )
        self.reqs[p] = new
        for update in updates:
            self.apply(rid, update)

    def filler_pass(self) -> None:
        s = self.stage
        self.window.grow(s + 1)
        w = self.window
        ms, zs, codes = _accel.filler_scan(
            s, w.theta_def, w.lambda_def, w.frozen, w.trap_m, use_numba=self.use_numba
        )
        for m, z, code in zip(ms.tolist(), zs.tolist(), codes.tolist()):
            self._fill(m, z, code)

    def _fill(self, m: int, z: int, code: int) -> None:
        s = self.stage
        if code & FILL1:
            sp = self.targets.get(m) or self.space(m)
            sp.theta.define(z, z, s, FILLER)
            sp.lam.define(z, z, s, FILLER)
            w = self.window
            if m < w.size and z < w.size:
                w.theta_def[m, z] = w.lambda_def[m, z] = True
            self.trace.append(Event(len(self.trace), s, FILLER, "fill1", (m, z)))
            return
        column = classify(z)
        if code & FILL2A:
            y = self.alloc.fresh_in_column(s, column)
            self._define("theta", m, z, y, FILLER)
            self._define("lambda", m, y, z, FILLER)
            self.emit(FILLER, "fill2a", m, z, y)
        if code & FILL2B:
            x = self.alloc.fresh_in_column(s, column)
            self._define("lambda", m, z, x, FILLER)
            self._define("theta", m, x, z, FILLER)
            self.emit(FILLER, "fill2b", m, z, x)

    def run_stage(self) -> None:
        s = self.stage
        self.alloc.observe(s)
        self.emit(ENGINE, "begin")
        for p in range(s + 1):
            self.visit(p)
        self.filler_pass()
        self.stage = s + 1

    # summaries

    def satisfied(self) -> list[int]:
        return sorted(p for p, local in self.reqs.items() if local.satisfied)

    def snapshot(self) -> dict:
        return snapshot_dict(self)


def filler_code(state: EngineState, m: int, z: int) -> int:
    """Which filler clauses fire at ``(m, z)``, computed straight from the maps."""
    tag = classify(z)
    own_column = isinstance(tag, Trap) and tag.m == m
    theta_def = state.theta(m, z) is not None
    lambda_def = state.lam(m, z) is not None
    if not own_column:
        return FILL1 if not (theta_def or lambda_def) else 0
    if state.is_frozen(m, z):
        return 0
    return (0 if theta_def else FILL2A) | (0 if lambda_def else FILL2B)


def filler_pass(state: EngineState, m: int, z: int) -> int:
    """Run the filler at one pair; returns the clause code that fired."""
    if not (m <= state.stage and z <= state.stage):
        raise ValueError(f"filler pair ({m}, {z}) lies outside stage {state.stage}")
    code = filler_code(state, m, z)
    if code:
        state.window.grow(max(m, z) + 1)
        state._fill(m, z, code)
    return code


def apply_updates(state: EngineState, rid: RequirementId, updates) -> EngineState:
    state.emit(str(rid), "visit")
    for update in updates:
        state.apply(rid, update)
    return state


def run_stage(state: EngineState) -> EngineState:
    state.run_stage()
    return state


def new_state(scenario: Scenario, use_numba: Optional[bool] = None) -> EngineState:
    return EngineState(scenario=scenario, use_numba=use_numba)


def run(scenario: Scenario, use_numba: Optional[bool] = None) -> tuple[EngineState, list[Event]]:
    """Run stages ``0..S-1``; raises :class:`RunAborted` on a hard failure."""
    state = new_state(scenario, use_numba)
    try:
        while state.stage < scenario.stages:
            state.run_stage()
    except ConstructionError as exc:
        raise RunAborted(exc, state) from exc
    return state, state.trace


def local_dict(local: RequirementState) -> dict:
    if isinstance(local, DLocal):
        return {"kind": "D", "state": local.state, "witness": local.witness, "satisfied": local.satisfied}
    return {
        "kind": "R",
        "state": local.state,
        "v": local.v,
        "trap": local.trap,
        "baits": list(local.baits),
        "xvals": sorted([r, x] for r, x in local.xvals.items()),
        "yv": local.yv,
        "tied": local.tied,
        "satisfied": local.satisfied,
    }


def snapshot_dict(state: EngineState) -> dict:
    """JSON-ready final state; the verifier rebuilds the same dict from a trace."""
    targets = {}
    for m in sorted(state.targets):
        sp = state.targets[m]
        targets[str(m)] = {
            "theta": [[k, sp.theta.assignments[k], *sp.theta.birth[k]] for k in sorted(sp.theta.assignments)],
            "lambda": [[k, sp.lam.assignments[k], *sp.lam.birth[k]] for k in sorted(sp.lam.assignments)],
        }
    return {
        "stages": state.stage,
        "high_water": state.alloc.high_water,
        "A": sorted([x, s] for x, s in state.A.items()),
        "targets": targets,
        "frozen": sorted([m, z, o] for (m, z), o in state.freezes.frozen.items()),
        "reqs": {str(p): local_dict(state.reqs[p]) for p in sorted(state.reqs)},
    }
