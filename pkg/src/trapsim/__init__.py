"""Deterministic simulator of a finite-injury construction of a c.e. set.

The construction builds a set ``A`` together with write-once coding maps
``Theta_m`` and ``Lambda_m`` whose virtual targets ``B_m = Lambda_m^-1(A)``
satisfy ``B_m =_m A``, while dynamic-trap requirements defeat candidate
finite-one reductions.  Runs are event-sourced: the trace is the record and
:mod:`trapsim.verifier` checks invariants over it.
"""

from .coding import FreshAllocator, classify, encode_neutral, encode_trap, pair, unpair
from .engine import EngineState, RunAborted, run
from .oracle import PartialFn, ScriptedFn, approx_eval, decode_program, run_machine
from .scenario import Scenario, load_scenario, parse_scenario
from .verifier import RunRecord, Verdict, run_checks

__all__ = [
    "EngineState",
    "FreshAllocator",
    "PartialFn",
    "RunAborted",
    "RunRecord",
    "Scenario",
    "ScriptedFn",
    "Verdict",
    "approx_eval",
    "classify",
    "decode_program",
    "encode_neutral",
    "encode_trap",
    "load_scenario",
    "pair",
    "parse_scenario",
    "run",
    "run_checks",
    "run_machine",
    "unpair",
]
