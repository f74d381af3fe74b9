"""Straight-line reference construction used as ground truth in tests.

This module deliberately imports nothing from the rest of the package.  It
re-derives pairing by diagonal walking, locates column elements by its own
bracketing search and writes the requirements as one flat loop, so agreement with the engine is
evidence rather than tautology.  It handles scripted scenarios only and
returns the digest vocabulary of :func:`trapsim.verifier.digest_lines`.
"""

from __future__ import annotations

import hashlib


def _cantor(x, y):
    return (x + y) * (x + y + 1) // 2 + y


def _split(z):
    # walk diagonals until z falls on one
    d = 0
    while (d + 1) * (d + 2) // 2 <= z:
        d += 1
    y = z - d * (d + 1) // 2
    return d - y, y


def _trap_of(z):
    first, rest = _split(z)
    if first != 0:
        return None
    m, rest = _split(rest)
    k, _ = _split(rest)
    return (m, k)


def _nth(kind, n):
    if kind == "neutral":
        return _cantor(1, n)
    m, k = kind
    return _cantor(0, _cantor(m, _cantor(k, n)))


def _column_above(kind, bound):
    # column elements increase with n: double a step until past, then halve back
    n, step = 0, 1
    while _nth(kind, n) <= bound:
        n += step
        step *= 2
    while step > 1:
        step //= 2
        if n - step >= 0 and _nth(kind, n - step) > bound:
            n -= step
    while n > 0 and _nth(kind, n - 1) > bound:
        n -= 1
    return _nth(kind, n)


def _slot_priority(label):
    words = label.split()
    vals = dict(w.split("=") for w in words[1:])
    if words[0] == "D":
        return 2 * int(vals["n"])
    return 2 * int(vals["l"]) + 1


def _tables(scenario):
    out = {}
    for slot in scenario.get("slots", []):
        p = _slot_priority(slot["slot"])
        for name in ("phi", "delta", "Phi"):
            if name in slot:
                out[(p, name)] = {row[0]: (row[1], row[2]) for row in slot[name]}
    return out


def reference_lines(scenario: dict) -> list[str]:
    if scenario.get("mode", "scripted") != "scripted":
        raise ValueError("the reference construction handles scripted scenarios only")
    stages = scenario["stages"]
    tables = _tables(scenario)
    lines = []
    hw = [0]
    theta, lam = {}, {}  # (m, key) -> val
    frozen = {}  # (m, z) -> priority
    A = set()
    req = {}  # priority -> dict of local data

    def seen(*nums):
        for n in nums:
            if n > hw[0]:
                hw[0] = n

    def fresh_in(kind, s):
        z = _column_above(kind, max(hw[0], s))
        hw[0] = z
        return z

    def ask(p, name, x, s):
        entry = tables.get((p, name), {}).get(x)
        if x >= s or entry is None:
            return None
        y, steps = entry
        if steps >= s or y >= s:
            return None
        return y

    def emit(line, *nums):
        lines.append(line)
        seen(*nums)

    def blank(p):
        if p % 2 == 0:
            return {"state": 1, "w": None, "done": False}
        return {"state": 1, "v": 0, "b": None, "a": [], "x": {}, "y": None, "tied": False, "done": False}

    def is_blank(p):
        return req[p] == blank(p)

    def set_theta(s, m, key, val):
        assert (m, key) not in theta
        theta[(m, key)] = val
        emit(f"{s} theta {m} {key} {val}", m, key, val)

    def set_lambda(s, m, key, val):
        assert (m, key) not in lam
        lam[(m, key)] = val
        emit(f"{s} lambda {m} {key} {val}", m, key, val)

    def wipe_below(p, s):
        for q in sorted(req):
            if p < q <= s and not is_blank(q):
                emit(f"{s} init {q}", q)
                r = req[q]
                if q % 2 == 1 and r["state"] == 2 and len(r["a"]) == r["v"] and r["v"] >= 1:
                    m = _split((q - 1) // 2)[0]
                    del frozen[(m, r["a"][-1])]
                    emit(f"{s} unfreeze {m} {r['a'][-1]}", m, r["a"][-1])
                req[q] = blank(q)

    for s in range(stages):
        seen(s)
        for p in range(s + 1):
            if p not in req:
                req[p] = blank(p)
            r = req[p]
            if r["done"]:
                continue
            if p % 2 == 0:
                if r["w"] is None:
                    r["w"] = fresh_in("neutral", s)
                val = ask(p, "phi", r["w"], s)
                if val is None:
                    continue
                r["state"] = 2
                emit(f"{s} state {p} 2 0", p)
                if val == 0:
                    A.add(r["w"])
                    emit(f"{s} enum {r['w']}")
                r["done"] = True
                emit(f"{s} sat {p} 0", p)
                wipe_below(p, s)
                continue

            m, k = _split((p - 1) // 2)
            col = (m, k)
            steps_taken = 0
            while True:
                steps_taken += 1
                assert steps_taken < 20
                if r["state"] == 1:
                    r["v"], r["state"] = 1, 2
                    emit(f"{s} state {p} 2 1", p)
                    continue
                if r["state"] == 2:
                    if len(r["a"]) < r["v"]:
                        a = fresh_in(col, s)
                        r["a"].append(a)
                        frozen[(m, a)] = p
                        emit(f"{s} freeze {m} {a}", m, a)
                    if r["v"] == 1 and r["b"] is None:
                        r["b"] = fresh_in(col, s)
                        set_lambda(s, m, r["b"], r["a"][0])
                    x = ask(p, "delta", r["a"][r["v"] - 1], s)
                    if x is None:
                        break
                    r["x"][r["v"]] = x
                    r["state"], r["tied"] = 3, False
                    emit(f"{s} state {p} 3 {r['v']}", p, x)
                    continue
                if r["state"] == 3:
                    v = r["v"]
                    a = r["a"][v - 1]
                    if not r["tied"]:
                        if any(r["x"].get(u) == r["x"][v] for u in range(1, v)):
                            del frozen[(m, a)]
                            emit(f"{s} unfreeze {m} {a}")
                            for i in range(v - 1):
                                if theta.get((m, r["a"][i])) == r["b"]:
                                    A.add(r["a"][i])
                                    emit(f"{s} enum {r['a'][i]}")
                            r["done"] = True
                            emit(f"{s} sat {p} 1", p)
                            wipe_below(p, s)
                            break
                        set_theta(s, m, a, r["b"])
                        del frozen[(m, a)]
                        emit(f"{s} unfreeze {m} {a}")
                        r["tied"] = True
                    y = ask(p, "Phi", r["x"][v], s)
                    if y is None:
                        break
                    r["y"], r["state"] = y, 4
                    emit(f"{s} state {p} 4 {v}", p, y)
                    continue
                if r["state"] == 4:
                    y = r["y"]
                    if y == r["b"]:
                        r["y"], r["tied"] = None, False
                        r["v"] += 1
                        r["state"] = 2
                        emit(f"{s} state {p} 2 {r['v']}", p, r["v"])
                        continue
                    if (m, y) in frozen or (m, y) not in lam:
                        break
                    c = lam[(m, y)]
                    branch = 3 if c in A else 2
                    if branch == 2:
                        for i in range(r["v"]):
                            if theta.get((m, r["a"][i])) == r["b"]:
                                A.add(r["a"][i])
                                emit(f"{s} enum {r['a'][i]}")
                    r["done"] = True
                    emit(f"{s} sat {p} {branch}", p)
                    wipe_below(p, s)
                    break

        cols = [_trap_of(z) for z in range(s + 1)]
        for m in range(s + 1):
            for z in range(s + 1):
                col = cols[z]
                if col is None or col[0] != m:
                    if (m, z) not in theta and (m, z) not in lam:
                        set_theta(s, m, z, z)
                        set_lambda(s, m, z, z)
                    continue
                if (m, z) in frozen:
                    continue
                if (m, z) not in theta:
                    y = fresh_in(col, s)
                    set_theta(s, m, z, y)
                    set_lambda(s, m, y, z)
                if (m, z) not in lam:
                    x = fresh_in(col, s)
                    set_lambda(s, m, z, x)
                    set_theta(s, m, x, z)
    return lines


def reference_digest(scenario: dict) -> str:
    return hashlib.sha256(("\n".join(reference_lines(scenario)) + "\n").encode()).hexdigest()
