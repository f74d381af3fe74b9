"""Finite-horizon invariant checks over traces.

Checks never look at engine internals.  A :class:`RunRecord` is rebuilt from
the event list alone by a tolerant replay that records violations (duplicate
defines, foreign unfreezes) instead of raising, so every check can report
concrete witnesses.  Each check returns a :class:`Verdict`.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .coding import NEUTRAL, Trap, classify
from .oracle import PartialFn
from .requirements import (
    BRANCH_COLLISION,
    BRANCH_EXIT_IN,
    BRANCH_EXIT_OUT,
    RequirementId,
)
from .scenario import Scenario
from .trace import ENGINE, FILLER, ORACLE_EVENTS, Event, render

PASS, FAIL, INDETERMINATE, NOT_APPLICABLE = "pass", "fail", "indeterminate", "n/a"
FILL_KINDS = ("fill1", "fill2a", "fill2b")
MAX_WITNESSES = 8


@dataclass
class Verdict:
    name: str
    status: str
    witnesses: list = field(default_factory=list)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (PASS, NOT_APPLICABLE)

    def line(self) -> str:
        parts = [f"{self.name:<20} {self.status}"]
        if self.detail:
            parts.append(self.detail)
        if self.witnesses:
            shown = "; ".join(str(w) for w in self.witnesses[:MAX_WITNESSES])
            more = len(self.witnesses) - MAX_WITNESSES
            parts.append(f"[{shown}{f'; +{more} more' if more > 0 else ''}]")
        return "  ".join(parts)

    def asdict(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail,
                "witnesses": [str(w) for w in self.witnesses]}


def _verdict(name, witnesses, detail="", empty_status=PASS):
    return Verdict(name, FAIL if witnesses else empty_status, witnesses, detail)


@dataclass
class RRun:
    """One run of an R requirement, between initializations."""

    priority: int
    start_seq: int
    trap: Optional[int] = None
    baits: list = field(default_factory=list)
    xvals: dict = field(default_factory=dict)
    tied: dict = field(default_factory=dict)  # bait -> seq of the module define
    anchor_define: Optional[int] = None
    answers: list = field(default_factory=list)  # (v, x, y, seq)
    loops: int = 0
    collision: Optional[tuple] = None  # (v, u, seq)
    exit: Optional[tuple] = None  # (v, y, c, member, seq)
    terminal: Optional[tuple] = None  # (branch, seq, invocation)
    ended_by_init: bool = False

    @property
    def rid(self) -> RequirementId:
        return RequirementId.of(self.priority)

    @property
    def anchor(self) -> Optional[int]:
        return self.baits[0] if self.baits else None


@dataclass
class RunRecord:
    scenario: Scenario
    scenario_dict: dict
    events: list[Event]
    text: Optional[str] = None

    def __post_init__(self):
        self._replay()

    @classmethod
    def from_trace(cls, scenario_dict: dict, events: list[Event], text: Optional[str] = None) -> "RunRecord":
        return cls(Scenario.from_dict(scenario_dict), scenario_dict, list(events), text)

    @classmethod
    def from_run(cls, scenario: Scenario, events: list[Event]) -> "RunRecord":
        return cls(scenario, scenario.to_dict(), list(events))

    # tolerant replay

    def _replay(self):
        self.A: dict[int, int] = {}
        self.theta: dict[int, dict[int, list]] = defaultdict(dict)  # m -> key -> [val, stage, author]
        self.lam: dict[int, dict[int, list]] = defaultdict(dict)
        self.define_seqs: dict[tuple, list[int]] = defaultdict(list)  # (map, m, key) -> seqs
        self.module_defines: list[tuple] = []  # (map, m, key, val, seq, author)
        self.frozen: dict[tuple[int, int], int] = {}
        self.freeze_problems: list[str] = []
        self.frozen_at: dict[int, bool] = {}  # seq of a clause-2 filler event -> target frozen then
        self.reqs: dict[int, dict] = {}
        self.invocation: list[int] = []  # per event: id of its routine invocation, -1 outside
        self.invocations: list[list[Event]] = []
        self.r_runs: list[RRun] = []
        self.d_runs: list[dict] = []
        self.high_water = 0
        self.final_stage = 0
        current_r: dict[int, RRun] = {}
        current_d: dict[int, dict] = {}
        inv = -1
        inv_author = None

        for ev in self.events:
            self.high_water = max(self.high_water, ev.stage, *ev.values)
            if ev.kind == "begin":
                self.final_stage = ev.stage + 1
            if ev.kind == "visit":
                self.invocations.append([])
                inv, inv_author = len(self.invocations) - 1, ev.author
            elif ev.author in (ENGINE, FILLER) or ev.author != inv_author:
                inv, inv_author = -1, None
            self.invocation.append(inv)
            if inv >= 0:
                self.invocations[inv].append(ev)
            self._apply(ev, inv, current_r, current_d)

    def _define(self, which, m, key, val, ev):
        table = self.theta if which == "theta" else self.lam
        self.define_seqs[(which, m, key)].append(ev.seq)
        table[m].setdefault(key, [val, ev.stage, ev.author])
        if ev.author not in (FILLER, ENGINE):
            self.module_defines.append((which, m, key, val, ev.seq, ev.author))

    def _req(self, p):
        local = self.reqs.get(p)
        if local is None:
            local = self.reqs[p] = _pristine_dict(p)
        return local

    def _apply(self, ev: Event, inv: int, current_r, current_d):
        kind, vals = ev.kind, ev.values
        rid = _rid_or_none(ev.author)
        p = rid.priority if rid else None
        local = self._req(p) if rid else None

        if kind in FILL_KINDS:
            m, z = vals[0], vals[1]
            if kind == "fill1":
                self._define("theta", m, z, z, ev)
                self._define("lambda", m, z, z, ev)
            else:
                self.frozen_at[ev.seq] = (m, z) in self.frozen
                if kind == "fill2a":
                    self._define("theta", m, z, vals[2], ev)
                    self._define("lambda", m, vals[2], z, ev)
                else:
                    self._define("lambda", m, z, vals[2], ev)
                    self._define("theta", m, vals[2], z, ev)
            return
        if kind == "define_theta":
            self._define("theta", *vals, ev)
        elif kind == "define_lambda":
            self._define("lambda", *vals, ev)
        elif kind == "enumerate":
            self.A.setdefault(vals[0], ev.stage)
        elif kind == "freeze":
            m, z, owner = vals
            if (m, z) in self.frozen:
                self.freeze_problems.append(f"seq {ev.seq}: ({m},{z}) already frozen by {self.frozen[(m, z)]}")
            self.frozen[(m, z)] = owner
        elif kind == "unfreeze":
            m, z, owner = vals
            if self.frozen.get((m, z)) != owner:
                self.freeze_problems.append(f"seq {ev.seq}: {owner} unfreezes ({m},{z}) held by {self.frozen.get((m, z))}")
            self.frozen.pop((m, z), None)
        elif kind == "initialize":
            q = vals[0]
            self.reqs[q] = _pristine_dict(q)
            if q in current_r:
                current_r.pop(q).ended_by_init = True
            current_d.pop(q, None)
            return

        if rid is None:
            return
        if rid.is_d:
            run = current_d.get(p)
            if run is None and kind != "visit":
                run = current_d[p] = {"priority": p, "witness": None, "value": None, "terminal": None}
                self.d_runs.append(run)
            if kind == "witness":
                local["witness"] = run["witness"] = vals[0]
            elif kind == "eval_phi":
                run["value"] = vals[1]
            elif kind == "state":
                local["state"] = vals[0]
            elif kind == "satisfied":
                local["satisfied"] = True
                run["terminal"] = (vals[0], ev.seq, inv)
            return

        run = current_r.get(p)
        if run is None and kind != "visit":
            run = current_r[p] = RRun(p, ev.seq)
            self.r_runs.append(run)
        if kind == "state":
            local["state"], local["v"] = vals
        elif kind == "bait":
            local["baits"].append(vals[1])
            run.baits.append(vals[1])
        elif kind == "trap":
            local["trap"] = run.trap = vals[0]
        elif kind == "define_lambda":
            if vals[1] == run.trap:
                run.anchor_define = ev.seq
        elif kind == "define_theta":
            local["tied"] = True
            run.tied[vals[1]] = ev.seq
        elif kind == "eval_delta":
            v, a, x = vals
            local["xvals"] = _set_pair(local["xvals"], v, x)
            local["tied"] = False
            run.xvals[v] = x
        elif kind == "eval_Phi":
            local["yv"] = vals[2]
            run.answers.append((vals[0], vals[1], vals[2], ev.seq))
        elif kind == "loop":
            local["yv"], local["tied"] = None, False
            run.loops += 1
        elif kind == "collision":
            run.collision = (vals[0], vals[1], ev.seq)
        elif kind == "exit":
            run.exit = (*vals, ev.seq)
        elif kind == "satisfied":
            local["satisfied"] = True
            run.terminal = (vals[0], ev.seq, inv)

    # derived views

    def sigma(self, m: int, x: int) -> Optional[int]:
        t = self.theta.get(m, {}).get(x)
        if t is None:
            return None
        lam = self.lam.get(m, {}).get(t[0])
        return None if lam is None else lam[0]

    def b_member(self, m: int, y: int) -> Optional[bool]:
        lam = self.lam.get(m, {}).get(y)
        return None if lam is None else lam[0] in self.A

    def snapshot(self) -> dict:
        targets = {}
        for m in sorted(set(self.theta) | set(self.lam)):
            targets[str(m)] = {
                "theta": [[k, *self.theta[m][k]] for k in sorted(self.theta[m])],
                "lambda": [[k, *self.lam[m][k]] for k in sorted(self.lam[m])],
            }
        return {
            "stages": self.final_stage,
            "high_water": self.high_water,
            "A": sorted([x, s] for x, s in self.A.items()),
            "targets": targets,
            "frozen": sorted([m, z, o] for (m, z), o in self.frozen.items()),
            "reqs": {str(p): self.reqs[p] for p in sorted(self.reqs)},
        }

    @property
    def stages(self) -> int:
        return self.scenario.stages


def _set_pair(pairs, v, x):
    d = {r: xx for r, xx in pairs}
    d[v] = x
    return sorted([r, xx] for r, xx in d.items())


def _pristine_dict(p: int) -> dict:
    if p % 2 == 0:
        return {"kind": "D", "state": 1, "witness": None, "satisfied": False}
    return {"kind": "R", "state": 1, "v": 0, "trap": None, "baits": [], "xvals": [],
            "yv": None, "tied": False, "satisfied": False}


def _rid_or_none(author: str) -> Optional[RequirementId]:
    if author in (ENGINE, FILLER):
        return None
    try:
        return RequirementId.parse(author)
    except (ValueError, KeyError):
        return None


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---- checks -------------------------------------------------------------


def check_write_once(run: RunRecord) -> Verdict:
    bad = [f"{which}_{m}({key}) defined at seqs {seqs}"
           for (which, m, key), seqs in sorted(run.define_seqs.items()) if len(seqs) > 1]
    return _verdict("write_once", bad, f"{len(run.define_seqs)} keys")


def _in_scope_ms(run: RunRecord, horizon: int) -> list[int]:
    return list(range(min(run.final_stage, run.scenario.stages, horizon + 1)))


def _default_horizon(run: RunRecord) -> int:
    if run.scenario.horizon is not None:
        return run.scenario.horizon
    return max(min(run.final_stage, run.scenario.stages) - 1, 0)


def check_sigma_dichotomy(run: RunRecord, horizon: Optional[int] = None) -> Verdict:
    H = _default_horizon(run) if horizon is None else horizon
    if run.final_stage == 0:
        return Verdict("sigma_dichotomy", NOT_APPLICABLE, detail="no stages")
    ties: dict[tuple[int, int], list] = defaultdict(list)
    for which, m, key, val, seq, author in run.module_defines:
        if which == "theta":
            ties[(m, key)].append((val, seq, author))
    anchors = {}  # (author, trap) -> anchor from that run's Lambda define
    for which, m, key, val, seq, author in run.module_defines:
        if which == "lambda":
            anchors[(author, m, key)] = val
    bad, private, tied = [], 0, 0
    for m in _in_scope_ms(run, H):
        for x in range(H + 1):
            s = run.sigma(m, x)
            if s is None:
                continue
            tx = ties.get((m, x))
            if not tx:
                private += 1
                if s != x:
                    bad.append(f"m={m} x={x}: untied but sigma={s}")
                continue
            tied += 1
            if len(tx) != 1:
                bad.append(f"m={m} x={x}: tied {len(tx)} times (seqs {[t[1] for t in tx]})")
                continue
            trap, seq, author = tx[0]
            rid = _rid_or_none(author)
            if rid is None or rid.is_d or rid.m != m or classify(x) != Trap(rid.m, rid.k):
                bad.append(f"m={m} x={x}: tie by {author} outside its own column")
                continue
            anchor = anchors.get((author, m, trap))
            if anchor is None or s != anchor:
                bad.append(f"m={m} x={x}: sigma={s} but the tying run's anchor is {anchor}")
    return _verdict("sigma_dichotomy", bad, f"H={H}: {private} private, {tied} tied")


def check_block_atomicity(run: RunRecord) -> Verdict:
    bad = []
    terminal_invs = {}
    for r in run.r_runs:
        if r.terminal is None:
            continue
        branch, seq, inv = r.terminal
        terminal_invs[inv] = r
        if branch == BRANCH_COLLISION:
            upto = r.collision[0] - 1 if r.collision else 0
        elif branch == BRANCH_EXIT_OUT:
            upto = r.exit[0] if r.exit else 0
        else:
            upto = None
        expected = set() if upto is None else {a for i, a in enumerate(r.baits, 1) if i <= upto and a in r.tied}
        got = {ev.values[0] for ev in run.invocations[inv] if ev.kind == "enumerate"} if inv >= 0 else set()
        if got != expected:
            bad.append(f"{r.rid} terminal seq {seq}: block {sorted(expected)} but enumerated {sorted(got)} together")
    # no R may enumerate outside its terminal invocation
    for ev, inv in zip(run.events, run.invocation):
        if ev.kind == "enumerate":
            rid = _rid_or_none(ev.author)
            if rid is not None and not rid.is_d and inv not in terminal_invs:
                bad.append(f"seq {ev.seq}: {ev.author} enumerates {ev.values[0]} outside a terminal block")
    blocks = sum(1 for r in terminal_invs.values() if r.terminal[0] in (BRANCH_COLLISION, BRANCH_EXIT_OUT))
    return _verdict("block_atomicity", bad, f"{blocks} block actions")


def _parked(run: RunRecord, p: int, local: dict) -> tuple[bool, str]:
    """Whether an unsatisfied requirement provably waits forever."""
    rid = RequirementId.of(p)
    if run.scenario.mode != "scripted":
        return False, f"{rid} waits on a machine oracle"
    if rid.is_d:
        table = run.scenario.table(p, "phi")
        w = local["witness"]
        if w is not None and (table is None or w not in table.entries):
            return True, ""
        return False, f"{rid} waits on phi({w}) which will converge"
    state = local["state"]
    if state == 2 and len(local["baits"]) == local["v"] and local["v"] >= 1:
        a = local["baits"][-1]
        table = run.scenario.table(p, "delta")
        if table is None or a not in table.entries:
            return True, ""
        return False, f"{rid} waits on Delta({a}) which will converge"
    if state == 3:
        x = dict((r, xx) for r, xx in local["xvals"]).get(local["v"])
        table = run.scenario.table(p, "Phi")
        if x is not None and (table is None or x not in table.entries):
            return True, ""
        return False, f"{rid} waits on Phi({x}) which will converge"
    return False, f"{rid} in State {state} is still live"


def settledness(run: RunRecord, m: int, horizon: int) -> tuple[bool, str]:
    """Whether A-membership on the window and its sigma-images can still change.

    A requirement can only ever enumerate its current witness or baits, or
    numbers chosen fresh later, which exceed everything mentioned so far.  So
    the window is settled once sigma_m is defined on it and no live
    (unsatisfied and not provably parked) requirement holds a number the
    window depends on.
    """
    relevant = set(range(horizon + 1))
    for x in range(horizon + 1):
        sx = run.sigma(m, x)
        if sx is None:
            return False, f"sigma_{m}({x}) undefined"
        relevant.add(sx)
    for p, local in sorted(run.reqs.items()):
        if local["satisfied"]:
            continue
        held = [local["witness"]] if local["kind"] == "D" else list(local["baits"])
        hit = [h for h in held if h in relevant]
        if not hit:
            continue
        ok, why = _parked(run, p, local)
        if not ok:
            return False, f"{why}, and it holds {hit[0]}"
    return True, ""


def check_equivalence(run: RunRecord, m: Optional[int] = None, horizon: Optional[int] = None) -> Verdict:
    H = _default_horizon(run) if horizon is None else horizon
    if run.final_stage == 0:
        return Verdict("equivalence", NOT_APPLICABLE, detail="no stages")
    ms = _in_scope_ms(run, H) if m is None else [m]
    bad, reasons = [], []
    for mm in ms:
        ok, why = settledness(run, mm, H)
        if not ok:
            reasons.append(f"m={mm}: {why}")
            continue
        for x in range(H + 1):
            left = x in run.A
            right = run.sigma(mm, x) in run.A
            if left != right:
                bad.append(f"m={mm} x={x}: x in A is {left}, sigma(x)={run.sigma(mm, x)} in A is {right}")
    if bad:
        return Verdict("equivalence", FAIL, bad, f"H={H}")
    if reasons:
        return Verdict("equivalence", INDETERMINATE, reasons[:1], f"H={H}: unsettled for {len(reasons)} of {len(ms)} m")
    return Verdict("equivalence", PASS, [], f"H={H}, m in {ms[0]}..{ms[-1]}" if ms else f"H={H}")


def check_injury_bound(run: RunRecord) -> Verdict:
    bad = []
    terminal_by = Counter()
    inits = Counter()
    for ev, inv in zip(run.events, run.invocation):
        if ev.kind == "satisfied":
            terminal_by[RequirementId.parse(ev.author).priority] += 1
        if ev.kind != "initialize":
            continue
        q = ev.values[0]
        inits[q] += 1
        rid = _rid_or_none(ev.author)
        if rid is None or inv < 0:
            bad.append(f"seq {ev.seq}: initialize of {q} outside a requirement's invocation")
            continue
        block = run.invocations[inv]
        pos = next(i for i, e in enumerate(block) if e.seq == ev.seq)
        before = {e.kind for e in block[:pos]}
        if "satisfied" not in before or "initialize_lower" not in before:
            bad.append(f"seq {ev.seq}: {ev.author} initializes {q} without a terminal action")
        if not rid.priority < q <= ev.stage:
            bad.append(f"seq {ev.seq}: {ev.author} initializes {q} outside ({rid.priority}, {ev.stage}]")
    for q, count in sorted(inits.items()):
        bound = sum(c for p, c in terminal_by.items() if p < q)
        if count > bound:
            bad.append(f"priority {q} initialized {count} times, only {bound} higher terminal actions")
    return _verdict("injury_bound", bad, f"{sum(inits.values())} initializations")


def _r_runs_for(run: RunRecord, l: Optional[int]):
    return [r for r in run.r_runs if l is None or r.rid.l == l]


def fibre(r: RRun) -> list[int]:
    return [x for v, x, y, seq in r.answers if y == r.trap]


def check_fibre_growth(run: RunRecord, l: Optional[int] = None) -> Verdict:
    runs = [r for r in _r_runs_for(run, l) if r.loops >= 2]
    if not runs:
        return Verdict("fibre_growth", NOT_APPLICABLE, detail="no R run looped passively twice")
    bad, sizes = [], []
    for r in runs:
        xs = fibre(r)
        sizes.append(f"{r.rid}:{len(xs)}")
        dup = [x for x, c in Counter(xs).items() if c > 1]
        if dup:
            bad.append(f"{r.rid} run at seq {r.start_seq}: fibre inputs repeat {dup}")
    return _verdict("fibre_growth", bad, "fibre sizes " + ", ".join(sizes))


def w_closure(run: RunRecord, p: int) -> set[int]:
    """Delta-consistent W_i: values Delta(a) for observed or scripted a in final A."""
    out = set()
    for r in run.r_runs:
        if r.priority == p:
            for v, x in r.xvals.items():
                if r.baits[v - 1] in run.A:
                    out.add(x)
    table = run.scenario.table(p, "delta")
    if table is not None:
        out.update(x for a, (x, _) in table.entries.items() if a in run.A)
    return out


def check_defeat_witness(run: RunRecord, l: Optional[int] = None) -> Verdict:
    runs = [r for r in _r_runs_for(run, l) if r.exit is not None]
    if not runs:
        return Verdict("defeat_witness", NOT_APPLICABLE, detail="no State-4 terminal action")
    bad, seen = [], []
    for r in runs:
        v, y, c, member, seq = r.exit
        W = w_closure(run, r.priority)
        x_v = r.xvals.get(v)
        b = run.b_member(r.rid.m, y)
        first = x_v in W and b is False
        second = x_v not in W and b is True
        if first == second:
            bad.append(f"{r.rid} exit seq {seq}: x_v={x_v} in W is {x_v in W}, y_v={y} in B is {b}")
            continue
        expected_branch = BRANCH_EXIT_OUT if first else BRANCH_EXIT_IN
        if r.terminal is None or r.terminal[0] != expected_branch:
            bad.append(f"{r.rid} exit seq {seq}: disjunct {'1' if first else '2'} holds but branch is {r.terminal}")
        seen.append(f"{r.rid}: {'x_v in W, y_v not in B' if first else 'x_v not in W, y_v in B'}")
    return _verdict("defeat_witness", bad, "; ".join(seen))


def check_collision_witness(run: RunRecord, l: Optional[int] = None) -> Verdict:
    runs = [r for r in _r_runs_for(run, l) if r.collision is not None]
    if not runs:
        return Verdict("collision_witness", NOT_APPLICABLE, detail="no collision")
    bad, seen = [], []
    for r in runs:
        v, u, seq = r.collision
        a_u, a_v = r.baits[u - 1], r.baits[v - 1]
        if a_u not in run.A:
            bad.append(f"{r.rid} seq {seq}: a_{u}={a_u} not in A")
        if a_v in run.A:
            bad.append(f"{r.rid} seq {seq}: a_{v}={a_v} in A")
        if r.xvals.get(u) != r.xvals.get(v):
            bad.append(f"{r.rid} seq {seq}: Delta(a_{u})={r.xvals.get(u)} != Delta(a_{v})={r.xvals.get(v)}")
        seen.append(f"{r.rid}: a_{u}={a_u} in A, a_{v}={a_v} not, Delta={r.xvals.get(v)}")
    return _verdict("collision_witness", bad, "; ".join(seen))


def check_freeze_respect(run: RunRecord) -> Verdict:
    bad = [f"seq {seq}: filler acts on frozen pair" for seq, frozen in sorted(run.frozen_at.items()) if frozen]
    bad += run.freeze_problems
    return _verdict("freeze_respect", bad, f"{len(run.frozen_at)} clause-2 actions")


def check_tie_before_unfreeze(run: RunRecord) -> Verdict:
    bad = []
    for r in run.r_runs:
        collision_bait = r.baits[r.collision[0] - 1] if r.collision else None
        if collision_bait is not None and collision_bait in r.tied:
            bad.append(f"{r.rid}: collision bait {collision_bait} was tied")
    for inv, block in enumerate(run.invocations):
        for i, ev in enumerate(block):
            if ev.kind != "unfreeze":
                continue
            rid = _rid_or_none(ev.author)
            m, z, owner = ev.values
            if rid is None or owner != rid.priority:
                continue  # released by an initializer
            is_collision = any(e.kind == "collision" for e in block[i + 1:])
            tied_before = any(e.kind == "define_theta" and e.values[1] == z for e in block[:i])
            if not is_collision and not tied_before:
                bad.append(f"seq {ev.seq}: {ev.author} unfreezes {z} before tying it")
    return _verdict("tie_before_unfreeze", bad)


def _oracle_for(run: RunRecord, ev: Event) -> Optional[PartialFn]:
    rid = RequirementId.parse(ev.author)
    name = {"eval_phi": "phi", "eval_delta": "delta", "eval_Phi": "Phi"}[ev.kind]
    if run.scenario.mode == "enumeration":
        code = {"phi": rid.n, "delta": rid.j, "Phi": rid.k}[name]
        return PartialFn.machine(code)
    table = run.scenario.table(rid.priority, name)
    return None if table is None else PartialFn(table)


def check_stage_convention(run: RunRecord) -> Verdict:
    bad, count = [], 0
    cache: dict[tuple, Optional[PartialFn]] = {}
    for ev in run.events:
        if ev.kind not in ORACLE_EVENTS:
            continue
        count += 1
        x, y = (ev.field(n) for n in ORACLE_EVENTS[ev.kind])
        if not (x < ev.stage and y < ev.stage):
            bad.append(f"seq {ev.seq}: {ev.kind} input {x} output {y} at stage {ev.stage}")
            continue
        key = (ev.author, ev.kind)
        if key not in cache:
            cache[key] = _oracle_for(run, ev)
        fn = cache[key]
        if fn is None or fn.approx_eval(x, ev.stage) != y:
            bad.append(f"seq {ev.seq}: {ev.kind}({x})={y} not visible at stage {ev.stage}")
    return _verdict("stage_convention", bad, f"{count} oracle answers")


def check_anchor_uniqueness(run: RunRecord) -> Verdict:
    bad, checked = [], 0
    pre: dict[int, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
    for m, table in run.lam.items():
        for key, (val, _, _) in table.items():
            pre[m][val].append(key)
    for r in run.r_runs:
        if r.trap is None or not r.baits:
            continue
        m = r.rid.m
        checked += 1
        got = sorted(pre[m].get(r.anchor, []))
        if got != [r.trap]:
            bad.append(f"{r.rid}: Lambda^-1(a_1={r.anchor}) = {got}, expected [{r.trap}]")
        for u, a in enumerate(r.baits[1:], 2):
            if a in r.tied and pre[m].get(a):
                bad.append(f"{r.rid}: tied a_{u}={a} has Lambda preimage {sorted(pre[m][a])}")
    return _verdict("anchor_uniqueness", bad, f"{checked} runs")


def check_visit_order(run: RunRecord) -> Verdict:
    bad = []
    satisfied: set[int] = set()
    stage, expect, visitor, filling = -1, 0, None, False

    def close(s, upto):
        for q in range(expect, upto):
            if q not in satisfied:
                bad.append(f"stage {s}: unsatisfied priority {q} not visited")

    for ev in run.events:
        if ev.stage != stage:
            if stage >= 0 and not filling:
                close(stage, stage + 1)
            if ev.kind != "begin" or ev.author != ENGINE:
                bad.append(f"seq {ev.seq}: stage {ev.stage} does not open with begin")
            if ev.stage < stage:
                bad.append(f"seq {ev.seq}: stage goes backwards")
            stage, expect, visitor, filling = ev.stage, 0, None, False
            continue
        if ev.kind == "begin":
            bad.append(f"seq {ev.seq}: second begin in stage {stage}")
            continue
        if ev.author == FILLER:
            if not filling:
                close(stage, stage + 1)
                expect = stage + 1
            filling = True
            continue
        if filling:
            bad.append(f"seq {ev.seq}: routine event after the filler in stage {stage}")
            continue
        if ev.kind == "visit":
            p = RequirementId.parse(ev.author).priority
            if p < expect or p > stage:
                bad.append(f"seq {ev.seq}: visit of {p} out of order (next allowed {expect}, stage {stage})")
            else:
                close(stage, p)
            if p in satisfied:
                bad.append(f"seq {ev.seq}: satisfied priority {p} visited")
            expect, visitor = p + 1, ev.author
            continue
        if ev.author != visitor:
            bad.append(f"seq {ev.seq}: event by {ev.author} inside the visit of {visitor}")
        if ev.kind == "satisfied":
            satisfied.add(RequirementId.parse(ev.author).priority)
        elif ev.kind == "initialize":
            satisfied.discard(ev.values[0])
    if stage >= 0 and not filling:
        close(stage, stage + 1)
    return _verdict("visit_order", bad)


def check_filler_order(run: RunRecord) -> Verdict:
    rank = {k: i for i, k in enumerate(FILL_KINDS)}
    bad, last = [], None
    for ev in run.events:
        if ev.kind == "begin":
            last = None
        is_fill = ev.kind in rank
        if is_fill != (ev.author == FILLER):
            bad.append(f"seq {ev.seq}: {ev.kind} authored by {ev.author}")
            continue
        if not is_fill:
            continue
        m, z = ev.values[0], ev.values[1]
        if m > ev.stage or z > ev.stage:
            bad.append(f"seq {ev.seq}: filler pair ({m},{z}) beyond stage {ev.stage}")
        key = (m, z, rank[ev.kind])
        if last is not None and key <= last:
            bad.append(f"seq {ev.seq}: filler pair {key[:2]} after {last[:2]}")
        last = key
    return _verdict("filler_order", bad)


def check_column_provenance(run: RunRecord) -> Verdict:
    bad, count = [], 0
    for ev in run.events:
        if ev.kind != "enumerate":
            continue
        count += 1
        x = ev.values[0]
        rid = _rid_or_none(ev.author)
        if rid is None:
            bad.append(f"seq {ev.seq}: {ev.author} enumerates {x}")
        elif rid.is_d and classify(x) != NEUTRAL:
            bad.append(f"seq {ev.seq}: {rid} enumerates {x} outside the neutral column")
        elif not rid.is_d and classify(x) != Trap(rid.m, rid.k):
            bad.append(f"seq {ev.seq}: {rid} enumerates {x} outside its column")
    return _verdict("column_provenance", bad, f"{count} enumerations")


FRESH_FIELDS = {"witness": 0, "bait": 1, "trap": 0, "fill2a": 2, "fill2b": 2}


def check_freshness(run: RunRecord) -> Verdict:
    bad, count, hw = [], 0, 0
    for ev in run.events:
        hw = max(hw, ev.stage)
        idx = FRESH_FIELDS.get(ev.kind)
        if idx is not None:
            count += 1
            val = ev.values[idx]
            if val <= hw:
                bad.append(f"seq {ev.seq}: {ev.kind} {val} not above {hw}")
            rid = _rid_or_none(ev.author)
            if ev.kind == "witness":
                want = NEUTRAL
            elif ev.kind in ("bait", "trap"):
                want = Trap(rid.m, rid.k) if rid is not None and not rid.is_d else None
            else:
                want = classify(ev.values[1])
            if classify(val) != want:
                bad.append(f"seq {ev.seq}: {ev.kind} {val} outside column {want}")
        if ev.values:
            hw = max(hw, *ev.values)
    return _verdict("freshness", bad, f"{count} fresh numbers")


def check_trace_replay(run: RunRecord, snapshot: Optional[dict] = None) -> Verdict:
    from .engine import RunAborted, run as engine_run

    bad = []
    for i, ev in enumerate(run.events):
        if ev.seq != i:
            bad.append(f"event {i} carries seq {ev.seq}")
            break
    if snapshot is not None and _canonical(snapshot) != _canonical(run.snapshot()):
        mine = run.snapshot()
        keys = [k for k in sorted(set(mine) | set(snapshot)) if _canonical(mine.get(k)) != _canonical(snapshot.get(k))]
        bad.append(f"snapshot differs from replay in {keys}")
    try:
        _, expected = engine_run(run.scenario)
    except RunAborted as exc:
        expected = exc.state.trace
    ours = render(run.scenario_dict, run.events)
    theirs = render(run.scenario_dict, expected)
    if ours != theirs:
        n = min(len(run.events), len(expected))
        first = next((i for i in range(n) if run.events[i] != expected[i]), n)
        bad.append(f"re-running the scenario diverges at event {first} "
                   f"({len(run.events)} events recorded, {len(expected)} expected)")
    return _verdict("trace_replay", bad, f"{len(run.events)} events")


CHECKS: dict[str, Callable[..., Verdict]] = {
    "write_once": check_write_once,
    "sigma_dichotomy": check_sigma_dichotomy,
    "block_atomicity": check_block_atomicity,
    "equivalence": check_equivalence,
    "injury_bound": check_injury_bound,
    "fibre_growth": check_fibre_growth,
    "defeat_witness": check_defeat_witness,
    "collision_witness": check_collision_witness,
    "freeze_respect": check_freeze_respect,
    "tie_before_unfreeze": check_tie_before_unfreeze,
    "stage_convention": check_stage_convention,
    "anchor_uniqueness": check_anchor_uniqueness,
    "visit_order": check_visit_order,
    "filler_order": check_filler_order,
    "column_provenance": check_column_provenance,
    "freshness": check_freshness,
    "trace_replay": check_trace_replay,
}


def run_checks(run: RunRecord, names: Iterable[str] = ("all",), snapshot: Optional[dict] = None) -> list[Verdict]:
    names = list(names)
    if "all" in names:
        names = list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s) {unknown}; choose from {sorted(CHECKS)} or all")
    out = []
    for name in names:
        if name == "trace_replay":
            out.append(check_trace_replay(run, snapshot))
        else:
            out.append(CHECKS[name](run))
    return out


# ---- digest projection for the independent replay oracle ----------------


def digest_lines(events: Iterable[Event]) -> list[str]:
    """Enumerations, defines, freezes, state changes, initializations and terminals."""
    out = []
    for ev in events:
        s, v = ev.stage, ev.values
        rid = _rid_or_none(ev.author)
        if ev.kind == "fill1":
            out += [f"{s} theta {v[0]} {v[1]} {v[1]}", f"{s} lambda {v[0]} {v[1]} {v[1]}"]
        elif ev.kind == "fill2a":
            out += [f"{s} theta {v[0]} {v[1]} {v[2]}", f"{s} lambda {v[0]} {v[2]} {v[1]}"]
        elif ev.kind == "fill2b":
            out += [f"{s} lambda {v[0]} {v[1]} {v[2]}", f"{s} theta {v[0]} {v[2]} {v[1]}"]
        elif ev.kind == "define_theta":
            out.append(f"{s} theta {v[0]} {v[1]} {v[2]}")
        elif ev.kind == "define_lambda":
            out.append(f"{s} lambda {v[0]} {v[1]} {v[2]}")
        elif ev.kind == "enumerate":
            out.append(f"{s} enum {v[0]}")
        elif ev.kind in ("freeze", "unfreeze"):
            out.append(f"{s} {ev.kind} {v[0]} {v[1]}")
        elif ev.kind == "state":
            out.append(f"{s} state {rid.priority} {v[0]} {v[1]}")
        elif ev.kind == "initialize":
            out.append(f"{s} init {v[0]}")
        elif ev.kind == "satisfied":
            out.append(f"{s} sat {rid.priority} {v[0]}")
    return out


def digest(lines: list[str]) -> str:
    return hashlib.sha256(("\n".join(lines) + "\n").encode()).hexdigest()
