import numpy as np
import pytest
from hypothesis import given, strategies as st

from trapsim import _accel
from trapsim.oracle import (
    DIVERGENT,
    Halt,
    Inc,
    JzDec,
    PartialFn,
    ScriptedFn,
    _compile,
    approx_eval,
    decode_program,
    encode_program,
    run_machine,
    we_member,
)

instructions = st.one_of(
    st.builds(Inc, st.integers(0, 4)),
    st.builds(JzDec, st.integers(0, 4), st.integers(0, 8)),
    st.just(Halt()),
)
programs = st.lists(instructions, max_size=6).map(tuple)


def test_stage_convention_examples():
    f = PartialFn.scripted({3: (5, 4)})
    assert approx_eval(f, 3, 5) is None  # output 5 is not below 5
    assert approx_eval(f, 3, 6) == 5
    assert approx_eval(f, 7, 7) is None
    assert approx_eval(DIVERGENT, 7, 7) is None


def test_steps_must_be_strictly_below_stage():
    f = PartialFn.scripted({0: (0, 3)})
    assert approx_eval(f, 0, 3) is None
    assert approx_eval(f, 0, 4) == 0


def test_we_member_examples():
    f = PartialFn.scripted({2: (0, 1)})
    assert we_member(f, 2, 3)
    assert not we_member(f, 2, 2)
    assert not any(we_member(f, 5, s) for s in range(50))


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 80))
def test_scripted_answers_obey_convention_and_monotonicity(x, y, steps, s):
    f = PartialFn.scripted({x: (y, steps)})
    got = approx_eval(f, x, s)
    if got is not None:
        assert x < s and got < s and got == y
        assert all(approx_eval(f, x, t) == y for t in range(s, s + 20))
    else:
        assert x >= s or y >= s or steps >= s


def test_run_machine_examples():
    assert run_machine((Halt(),), 9, 10) == (9, 1)
    assert run_machine((Inc(0), Halt()), 0, 10) == (1, 2)
    loop = (JzDec(1, 0),)
    assert all(run_machine(loop, x, budget) is None for x in range(4) for budget in (1, 10, 1000))


def test_falling_off_the_end_halts():
    assert run_machine((), 4, 1) == (4, 1)
    assert run_machine((Inc(0),), 4, 5) == (5, 2)


def test_budget_bounds_steps():
    program = (Inc(0), Inc(0), Halt())
    assert run_machine(program, 0, 2) is None
    assert run_machine(program, 0, 3) == (2, 3)
    assert run_machine(program, 0, 0) is None


def test_doubling_program():
    program = (JzDec(0, 4), Inc(1), Inc(1), JzDec(2, 0), JzDec(1, 7), Inc(0), JzDec(2, 4))
    y, steps = run_machine(program, 5, 1000)
    assert y == 10


def test_decode_program_examples():
    assert decode_program(0) == ()
    for e in range(1000):
        decode_program(e)


@given(programs)
def test_program_roundtrip(program):
    assert decode_program(encode_program(program)) == program


@given(programs, st.integers(0, 30), st.integers(0, 200))
def test_numba_and_python_paths_agree(program, x, budget):
    code = _compile(program)
    py = _accel.run_program(code.ops, code.regs, code.targets, code.nregs, x, budget, use_numba=False)
    nb = _accel.run_program(code.ops, code.regs, code.targets, code.nregs, x, budget, use_numba=True)
    assert py == nb


def test_machine_memo_is_consistent():
    program = (JzDec(0, 4), Inc(1), Inc(1), JzDec(2, 0), JzDec(1, 7), Inc(0), JzDec(2, 4))
    f = PartialFn.machine(encode_program(program))
    first = [approx_eval(f, 3, s) for s in range(60)]
    again = [approx_eval(f, 3, s) for s in reversed(range(60))][::-1]
    assert first == again
    settled = [s for s, y in enumerate(first) if y is not None]
    assert settled and all(first[s] == 6 for s in range(settled[0], 60))


def test_scripted_fn_rejects_negative_fields():
    with pytest.raises(ValueError):
        ScriptedFn({1: (-1, 0)})


def test_scripted_converges_by():
    assert ScriptedFn({3: (5, 4)}).converges_by() == 6
    assert ScriptedFn().converges_by() == 0


def test_filler_scan_paths_agree():
    rng = np.random.default_rng(3)
    n = 40
    theta = rng.random((n, n)) < 0.5
    lam = rng.random((n, n)) < 0.5
    frozen = rng.random((n, n)) < 0.1
    trap_m = np.where(rng.random(n) < 0.3, rng.integers(0, n, n), -1).astype(np.int64)
    a = _accel.filler_scan(n - 1, theta, lam, frozen, trap_m, use_numba=True)
    b = _accel.filler_scan(n - 1, theta, lam, frozen, trap_m, use_numba=False)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
