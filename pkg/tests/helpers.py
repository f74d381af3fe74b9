"""Shared test helpers: sparse-stage drives and trace surgery."""

from __future__ import annotations

from trapsim.coding import encode_trap
from trapsim.engine import EngineState, filler_pass, new_state
from trapsim.scenario import parse_scenario
from trapsim.trace import ENGINE, Event


def column00(n):
    return encode_trap(0, 0, n)


def sparse_drive(scenario, schedule):
    """Run chosen visits at chosen stages, skipping every other stage.

    ``schedule`` is a list of ``(stage, actions)`` where an action is a
    priority to visit or ``("fill", m, z)`` for a single filler pair.  This
    reaches branches whose stage numbers a full run could never afford, with
    the real routines and the real update application.
    """
    state: EngineState = new_state(scenario)
    for stage, actions in schedule:
        state.stage = stage
        state.alloc.observe(stage)
        state.emit(ENGINE, "begin")
        for act in actions:
            if isinstance(act, tuple):
                filler_pass(state, act[1], act[2])
            else:
                state.visit(act)
    return state


def scenario(text):
    return parse_scenario(text, "<test>")


# Delta on the bait sequence of a lone R_0 started at stage 1 with no filler:
# a_1 = 20, b* = 230, a_2 = 1539 (after the stage-231 visit), a_3 = 7259, ...
A1, TRAP, A2, A3 = column00(1), column00(2), column00(3), column00(4)

COLLISION = scenario(f"""
stages: 2
slots:
  - slot: R l=0
    delta: [[{A1}, 5, 1], [{A2}, 5, 1]]
    Phi: [[5, {TRAP}, 1]]
""")

TRAP_NOTIN = scenario(f"""
stages: 2
slots:
  - slot: R l=0
    delta: [[{A1}, 5, 1]]
    Phi: [[5, 10, 1]]
""")

TRAP_IN = scenario(f"""
stages: 2
slots:
  - slot: D n=0
    phi: [[1, 0, 1]]
  - slot: R l=0
    delta: [[{A1}, 5, 1]]
    Phi: [[5, 1, 1]]
""")


def collision_state():
    # stage 1 picks a_1, b*; 21 ties a_1; 231 loops and picks a_2; 1540 collides
    return sparse_drive(COLLISION, [(1, [1]), (21, [1]), (231, [1]), (A2 + 1, [1])])


def trap_notin_state():
    return sparse_drive(TRAP_NOTIN, [(1, [1]), (21, [1, ("fill", 0, 10)]), (22, [1])])


def trap_in_state():
    # D_0 picks witness 1 at stage 0; R_0 starts at stage 3 after D_0 acted at 2
    return sparse_drive(TRAP_IN, [(0, [0]), (2, [0]), (3, [1, ("fill", 0, 1)]), (A1 + 1, [1])])


def loop_state(loops):
    """R_0 feeding Phi == b* on an injective Delta; returns state after ``loops`` loops."""
    baits = [column00(n) for n in range(1, loops + 3) if n != 2]
    rows = ", ".join(f"[{a}, {i}, 1]" for i, a in enumerate(baits))
    phi_rows = ", ".join(f"[{i}, {TRAP}, 1]" for i in range(len(baits)))
    sc = scenario(f"""
stages: 2
slots:
  - slot: R l=0
    delta: [{rows}]
    Phi: [{phi_rows}]
""")
    schedule = [(1, [1])]
    stage = TRAP + 1
    for a in baits[:loops]:
        stage = max(stage, a + 1)
        schedule.append((stage, [1]))
        stage += 1
    return sparse_drive(sc, schedule)


BLOCK = scenario(f"""
stages: 2
slots:
  - slot: R l=0
    delta: [[{A1}, 0, 1], [{A2}, 1, 1]]
    Phi: [[0, {TRAP}, 1], [1, 10, 1]]
""")


def block_state():
    """One passive loop, then an exit with c not in A: the block {a_1, a_2} is enumerated."""
    return sparse_drive(BLOCK, [(1, [1]), (TRAP + 1, [1]), (A2 + 1, [1, ("fill", 0, 10)]), (A2 + 2, [1])])


def replace_event(events, index, **changes):
    out = list(events)
    out[index] = out[index]._replace(**changes)
    return renumber(out)


def insert_event(events, index, stage, author, kind, values):
    out = list(events)
    out.insert(index, Event(0, stage, author, kind, tuple(values)))
    return renumber(out)


def renumber(events):
    return [ev._replace(seq=i) for i, ev in enumerate(events)]


def find(events, kind, **fields):
    for i, ev in enumerate(events):
        if ev.kind == kind and all(ev.field(k) == v for k, v in fields.items()):
            return i
    raise LookupError(f"no {kind} event with {fields}")
