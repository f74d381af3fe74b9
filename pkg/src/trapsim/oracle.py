"""Partial computable functions under the stage convention.

A value is visible at stage ``s`` only if the computation halts in fewer than
``s`` steps, the input is below ``s`` and the output is below ``s``.  Two
backends exist: finite scripted tables and register-machine programs reached
through a Goedel numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple, Optional, Union

import numpy as np

from . import _accel
from .coding import pair, unpair


class Inc(NamedTuple):
    r: int


class JzDec(NamedTuple):
    """If register ``r`` is zero jump to ``target``, else decrement it."""

    r: int
    target: int


class Halt(NamedTuple):
    pass


Instruction = Union[Inc, JzDec, Halt]
Program = tuple


def encode_instruction(ins: Instruction) -> int:
    if isinstance(ins, Inc):
        return 3 * ins.r + 1
    if isinstance(ins, JzDec):
        return 3 * pair(ins.r, ins.target) + 2
    return 0


def decode_instruction(c: int) -> Instruction:
    op, arg = c % 3, c // 3
    if op == 1:
        return Inc(arg)
    if op == 2:
        return JzDec(*unpair(arg))
    return Halt()


def encode_program(program) -> int:
    codes = [encode_instruction(ins) for ins in program]
    if not codes:
        return 0
    body = codes[-1]
    for c in reversed(codes[:-1]):
        body = pair(c, body)
    return pair(len(codes), body)


def decode_program(e: int) -> Program:
    """Length-prefixed nested pairing; total on every natural number."""
    length, body = unpair(e)
    codes = []
    for _ in range(length - 1):
        c, body = unpair(body)
        codes.append(c)
    if length:
        codes.append(body)
    return tuple(decode_instruction(c) for c in codes)


@dataclass(frozen=True)
class _Compiled:
    ops: np.ndarray
    regs: np.ndarray
    targets: np.ndarray
    nregs: int


def _compile(program: Program) -> _Compiled:
    used = sorted({0} | {ins.r for ins in program if not isinstance(ins, Halt)})
    index = {r: i for i, r in enumerate(used)}
    size = len(program)
    ops = np.zeros(size, dtype=np.int64)
    regs = np.zeros(size, dtype=np.int64)
    targets = np.full(size, size, dtype=np.int64)
    for pc, ins in enumerate(program):
        if isinstance(ins, Inc):
            ops[pc] = _accel.OP_INC
            regs[pc] = index[ins.r]
        elif isinstance(ins, JzDec):
            ops[pc] = _accel.OP_JZDEC
            regs[pc] = index[ins.r]
            # out-of-range targets fall off the end, which halts
            targets[pc] = min(ins.target, size)
        else:
            ops[pc] = _accel.OP_HALT
    return _Compiled(ops, regs, targets, len(used))


def run_machine(program: Program, x: int, step_budget: int) -> Optional[tuple[int, int]]:
    """Run ``program`` on ``x``; ``(output, steps)`` if it halts within budget.

    Every executed instruction costs one step, including ``Halt`` and the
    implicit halt when control leaves the program.
    """
    return _run_compiled(_compile(tuple(program)), x, step_budget)


def _run_compiled(code: _Compiled, x: int, budget: int) -> Optional[tuple[int, int]]:
    if budget <= 0:
        return None
    halted, y, steps = _accel.run_program(code.ops, code.regs, code.targets, code.nregs, x, budget)
    return (y, steps) if halted else None


@dataclass(frozen=True)
class ScriptedFn:
    """Finite table ``x -> (output, steps)``; divergent elsewhere."""

    entries: Mapping[int, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {int(x): (int(y), int(t)) for x, (y, t) in dict(self.entries).items()}
        for x, (y, t) in frozen.items():
            if x < 0 or y < 0 or t < 0:
                raise ValueError(f"scripted entry ({x}, {y}, {t}) has a negative field")
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    def converges_by(self) -> int:
        """First stage at which every entry is visible."""
        return max((max(x, y, t) + 1 for x, (y, t) in self.entries.items()), default=0)


class PartialFn:
    """A partial computable function: scripted table or machine code."""

    def __init__(self, backend: Union[ScriptedFn, int]):
        self.backend = backend
        self._compiled: Optional[_Compiled] = None
        # x -> (output, steps) once halted, or the largest budget that failed
        self._memo: dict[int, Union[tuple[int, int], int]] = {}

    @classmethod
    def scripted(cls, entries: Mapping[int, tuple[int, int]]) -> "PartialFn":
        return cls(ScriptedFn(entries))

    @classmethod
    def machine(cls, code: int) -> "PartialFn":
        return cls(int(code))

    @property
    def is_scripted(self) -> bool:
        return isinstance(self.backend, ScriptedFn)

    def __repr__(self):
        if self.is_scripted:
            return f"PartialFn(scripted, {len(self.backend.entries)} entries)"
        return f"PartialFn(machine {self.backend})"

    def _halting(self, x: int, budget: int) -> Optional[tuple[int, int]]:
        if self.is_scripted:
            hit = self.backend.entries.get(x)
            if hit is None or hit[1] > budget:
                return None
            return hit
        known = self._memo.get(x)
        if isinstance(known, tuple):
            return known if known[1] <= budget else None
        if known is not None and known >= budget:
            return None
        if self._compiled is None:
            self._compiled = _compile(decode_program(self.backend))
        result = _run_compiled(self._compiled, x, budget)
        self._memo[x] = result if result is not None else budget
        return result

    def approx_eval(self, x: int, s: int) -> Optional[int]:
        if x >= s:
            return None
        hit = self._halting(x, s - 1)
        if hit is None or hit[0] >= s:
            return None
        return hit[0]


DIVERGENT = PartialFn(ScriptedFn())


def approx_eval(f: PartialFn, x: int, s: int) -> Optional[int]:
    return f.approx_eval(x, s)


def we_member(f: PartialFn, x: int, s: int) -> bool:
    """Membership of ``x`` in the stage-``s`` approximation of ``dom(f)``."""
    return f.approx_eval(x, s) is not None
