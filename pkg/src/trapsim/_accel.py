"""Hot kernels with a numba path and a pure numpy/python fallback.

Set ``TRAPSIM_DISABLE_NUMBA=1`` to force the fallback.  Both paths return
identical results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

OP_HALT, OP_INC, OP_JZDEC = 0, 1, 2

# registers stay below input + budget; keep both well inside int64
INT64_SAFE = 1 << 62

_disabled = os.environ.get("TRAPSIM_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by TRAPSIM_DISABLE_NUMBA")
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None


def _filler_scan_numpy(s, theta_def, lambda_def, frozen, trap_m):
    n = s + 1
    td = theta_def[:n, :n]
    ld = lambda_def[:n, :n]
    fr = frozen[:n, :n]
    own = trap_m[None, :n] == np.arange(n)[:, None]
    clause1 = ~own & ~td & ~ld
    open_col = own & ~fr
    codes = (
        clause1.astype(np.int8)
        | ((open_col & ~td).astype(np.int8) << 1)
        | ((open_col & ~ld).astype(np.int8) << 2)
    )
    ms, zs = np.nonzero(codes)
    return ms.astype(np.int64), zs.astype(np.int64), codes[ms, zs].astype(np.int64)


def _run_program_python(ops, regs, targets, nregs, x, budget):
    reg = [0] * nregs
    reg[0] = x
    pc = 0
    size = len(ops)
    steps = 0
    while steps < budget:
        steps += 1
        if pc >= size:
            return True, reg[0], steps
        op = ops[pc]
        if op == OP_HALT:
            return True, reg[0], steps
        r = regs[pc]
        if op == OP_INC:
            reg[r] += 1
            pc += 1
        elif reg[r] == 0:
            pc = targets[pc]
        else:
            reg[r] -= 1
            pc += 1
    return False, 0, steps


if USE_NUMBA:

    @numba.njit(cache=True)
    def _filler_scan_numba(s, theta_def, lambda_def, frozen, trap_m):
        n = s + 1
        out_m = np.empty(n * n, dtype=np.int64)
        out_z = np.empty(n * n, dtype=np.int64)
        out_c = np.empty(n * n, dtype=np.int64)
        count = 0
        for m in range(n):
            for z in range(n):
                code = 0
                if trap_m[z] != m:
                    if not theta_def[m, z] and not lambda_def[m, z]:
                        code = 1
                elif not frozen[m, z]:
                    if not theta_def[m, z]:
                        code |= 2
                    if not lambda_def[m, z]:
                        code |= 4
                if code:
                    out_m[count] = m
                    out_z[count] = z
                    out_c[count] = code
                    count += 1
        return out_m[:count], out_z[:count], out_c[:count]

    @numba.njit(cache=True)
    def _run_program_numba(ops, regs, targets, nregs, x, budget):
        reg = np.zeros(nregs, dtype=np.int64)
        reg[0] = x
        pc = 0
        size = ops.shape[0]
        steps = 0
        while steps < budget:
            steps += 1
            if pc >= size:
                return True, reg[0], steps
            op = ops[pc]
            if op == OP_HALT:
                return True, reg[0], steps
            r = regs[pc]
            if op == OP_INC:
                reg[r] += 1
                pc += 1
            elif reg[r] == 0:
                pc = targets[pc]
            else:
                reg[r] -= 1
                pc += 1
        return False, 0, steps


def filler_scan(s, theta_def, lambda_def, frozen, trap_m, use_numba=None):
    """Pairs ``(m, z)`` with ``m, z <= s`` where the filler must act.

    Returns arrays ``(ms, zs, codes)`` in lexicographic order.  Code bit 0 is
    clause 1, bit 1 is clause 2a (Theta missing), bit 2 is clause 2b (Lambda
    missing).
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _filler_scan_numba(s, theta_def, lambda_def, frozen, trap_m)
    return _filler_scan_numpy(s, theta_def, lambda_def, frozen, trap_m)


def run_program(ops, regs, targets, nregs, x, budget, use_numba=None):
    """Execute a compiled register program; returns ``(halted, y, steps)``."""
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and x < INT64_SAFE and budget < INT64_SAFE:
        halted, y, steps = _run_program_numba(ops, regs, targets, nregs, x, budget)
        return bool(halted), int(y), int(steps)
    return _run_program_python(ops.tolist(), regs.tolist(), targets.tolist(), nregs, x, budget)


def warmup():
    """Trigger JIT compilation so timings exclude it."""
    if not USE_NUMBA:
        return
    z = np.zeros((2, 2), dtype=np.bool_)
    filler_scan(1, z, z, z, np.full(2, -1, dtype=np.int64))
    one = np.zeros(1, dtype=np.int64)
    run_program(one, one, one, 1, 0, 1)
