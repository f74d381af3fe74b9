"""Local routines of the diagonalization and dynamic-trap requirements.

Routines are transition functions.  They read a state view, may draw fresh
numbers from the allocator, and return the new local data together with the
list of primitive updates for the engine to apply atomically.  Updates are
plain tuples ``(kind, *fields)`` using the field layout in :mod:`trapsim.trace`.
"""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from typing import Optional, Protocol, Union

from .coding import NEUTRAL, FreshAllocator, Trap, unpair
from .oracle import PartialFn
from .targets import ConstructionError

BRANCH_D = 0
BRANCH_COLLISION = 1
BRANCH_EXIT_OUT = 2  # c not in A_s: current anchor block enumerated
BRANCH_EXIT_IN = 3  # c already in A_s: nothing enumerated

BRANCH_NAMES = {
    BRANCH_D: "diagonalize",
    BRANCH_COLLISION: "collision",
    BRANCH_EXIT_OUT: "exit-c-outside-A",
    BRANCH_EXIT_IN: "exit-c-in-A",
}

# 1 -> 2 -> 3 -> 4 -> 2 is the longest chain before a wait; leave headroom
MAX_TRANSITIONS = 16


@dataclass(frozen=True)
class RequirementId:
    priority: int
    kind: str
    n: int = 0
    l: int = 0
    m: int = 0
    k: int = 0
    i: int = 0
    j: int = 0

    @classmethod
    @functools.lru_cache(maxsize=None)
    def of(cls, priority: int) -> "RequirementId":
        if priority % 2 == 0:
            return cls(priority, "D", n=priority // 2)
        l = (priority - 1) // 2
        m, k = unpair(l)
        i, j = unpair(m)
        return cls(priority, "R", l=l, m=m, k=k, i=i, j=j)

    @classmethod
    def d(cls, n: int) -> "RequirementId":
        return cls.of(2 * n)

    @classmethod
    def r(cls, l: int) -> "RequirementId":
        return cls.of(2 * l + 1)

    @property
    def is_d(self) -> bool:
        return self.kind == "D"

    @property
    def column(self) -> Union[Trap, type(NEUTRAL)]:
        return NEUTRAL if self.is_d else Trap(self.m, self.k)

    def __str__(self) -> str:
        if self.is_d:
            return f"D:n={self.n}"
        return f"R:l={self.l},m={self.m},k={self.k}"

    @classmethod
    @functools.lru_cache(maxsize=None)
    def parse(cls, text: str) -> "RequirementId":
        kind, _, rest = text.partition(":")
        fields = dict(part.split("=", 1) for part in rest.split(","))
        if kind == "D":
            return cls.d(int(fields["n"]))
        if kind == "R":
            rid = cls.r(int(fields["l"]))
            if {"m", "k"} <= fields.keys() and (int(fields["m"]), int(fields["k"])) != (rid.m, rid.k):
                raise ValueError(f"{text}: m,k disagree with l")
            return rid
        raise ValueError(f"not a requirement: {text!r}")


@dataclass
class DLocal:
    state: int = 1
    witness: Optional[int] = None
    satisfied: bool = False


@dataclass
class RLocal:
    state: int = 1
    v: int = 0
    trap: Optional[int] = None
    baits: list[int] = field(default_factory=list)
    xvals: dict[int, int] = field(default_factory=dict)
    yv: Optional[int] = None
    tied: bool = False  # whether a_v has passed the tie step of State 3
    satisfied: bool = False

    def frozen_bait(self) -> Optional[int]:
        """The bait this run currently holds frozen, if any."""
        if self.state == 2 and len(self.baits) == self.v and self.v >= 1:
            return self.baits[-1]
        return None


RequirementState = Union[DLocal, RLocal]


def pristine(rid: RequirementId) -> RequirementState:
    return DLocal() if rid.is_d else RLocal()


class StateView(Protocol):
    def theta(self, m: int, key: int) -> Optional[int]: ...

    def lam(self, m: int, key: int) -> Optional[int]: ...

    def is_frozen(self, m: int, z: int) -> bool: ...

    def in_a(self, x: int) -> bool: ...


def visit_d(local: DLocal, phi: PartialFn, s: int, alloc: FreshAllocator):
    if local.satisfied:
        return local, []
    updates = []
    witness = local.witness
    if witness is None:
        witness = alloc.fresh_in_column(s, NEUTRAL)
        updates.append(("witness", witness))
    value = phi.approx_eval(witness, s)
    if value is None:
        return DLocal(state=1, witness=witness), updates
    updates.append(("eval_phi", witness, value))
    updates.append(("state", 2, 0))
    if value == 0:
        updates.append(("enumerate", witness))
    updates.append(("satisfied", BRANCH_D))
    updates.append(("initialize_lower",))
    return DLocal(state=2, witness=witness, satisfied=True), updates


def visit_r(
    local: RLocal,
    rid: RequirementId,
    delta: PartialFn,
    phi: PartialFn,
    view: StateView,
    s: int,
    alloc: FreshAllocator,
):
    if local.satisfied:
        return local, []
    if local.state == 2 and local.trap is not None and len(local.baits) == local.v:
        # parked on Delta(a_v): nothing changes unless it converges now
        if delta.approx_eval(local.baits[-1], s) is None:
            return local, []
    loc = dataclasses.replace(local, baits=list(local.baits), xvals=dict(local.xvals))
    m, column, me = rid.m, rid.column, rid.priority
    updates = []
    tied_now: dict[int, int] = {}

    def theta(a):
        return tied_now[a] if a in tied_now else view.theta(m, a)

    def anchor_block(upto):
        return [a for r, a in enumerate(loc.baits, 1) if r <= upto and theta(a) == loc.trap]

    for _ in range(MAX_TRANSITIONS):
        if loc.state == 1:
            loc.v, loc.state = 1, 2
            updates.append(("state", 2, 1))
            continue

        if loc.state == 2:
            if len(loc.baits) < loc.v:
                a = alloc.fresh_in_column(s, column)
                loc.baits.append(a)
                updates.append(("bait", loc.v, a))
                updates.append(("freeze", m, a, me))
            if loc.v == 1 and loc.trap is None:
                loc.trap = alloc.fresh_in_column(s, column)
                updates.append(("trap", loc.trap))
                updates.append(("define_lambda", m, loc.trap, loc.baits[0]))
            a = loc.baits[loc.v - 1]
            x = delta.approx_eval(a, s)
            if x is None:
                break
            loc.xvals[loc.v] = x
            loc.state, loc.tied = 3, False
            updates.append(("eval_delta", loc.v, a, x))
            updates.append(("state", 3, loc.v))
            continue

        if loc.state == 3:
            v = loc.v
            if v not in loc.xvals or len(loc.baits) < v:
                raise ConstructionError(f"{rid}: State 3 without a converged bait {v}")
            a, x = loc.baits[v - 1], loc.xvals[v]
            if not loc.tied:
                earlier = [u for u in range(1, v) if loc.xvals.get(u) == x]
                if earlier:
                    updates.append(("unfreeze", m, a, me))
                    updates.append(("collision", v, earlier[0]))
                    updates.extend(("enumerate", b) for b in anchor_block(v - 1))
                    updates.append(("satisfied", BRANCH_COLLISION))
                    updates.append(("initialize_lower",))
                    loc.satisfied = True
                    break
                # tie strictly before unfreeze so the filler cannot privatize a
                updates.append(("define_theta", m, a, loc.trap))
                updates.append(("unfreeze", m, a, me))
                tied_now[a] = loc.trap
                loc.tied = True
            y = phi.approx_eval(x, s)
            if y is None:
                break
            loc.yv, loc.state = y, 4
            updates.append(("eval_Phi", v, x, y))
            updates.append(("state", 4, v))
            continue

        if loc.state == 4:
            y = loc.yv
            if y == loc.trap:
                updates.append(("loop", loc.v))
                loc.yv, loc.tied = None, False
                loc.v += 1
                loc.state = 2
                updates.append(("state", 2, loc.v))
                continue
            c = None if view.is_frozen(m, y) else view.lam(m, y)
            if c is None:
                break
            inside = view.in_a(c)
            updates.append(("exit", loc.v, y, c, int(inside)))
            if not inside:
                updates.extend(("enumerate", b) for b in anchor_block(loc.v))
            updates.append(("satisfied", BRANCH_EXIT_IN if inside else BRANCH_EXIT_OUT))
            updates.append(("initialize_lower",))
            loc.satisfied = True
            break

        raise ConstructionError(f"{rid}: unknown state {loc.state}")
    else:
        raise ConstructionError(f"{rid}: routine exceeded {MAX_TRANSITIONS} transitions at stage {s}")
    return loc, updates


def initialize(local: RequirementState, rid: RequirementId):
    """Discard the run: pristine local data plus unfreezes for held baits."""
    updates = []
    if isinstance(local, RLocal):
        held = local.frozen_bait()
        if held is not None:
            updates.append(("unfreeze", rid.m, held, rid.priority))
    return pristine(rid), updates
