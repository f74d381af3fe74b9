import pytest

from helpers import (
    A1, A2, TRAP, block_state, collision_state, find, insert_event, loop_state,
    replace_event, renumber, scenario, trap_in_state, trap_notin_state,
)
from trapsim.engine import run
from trapsim.scenario import Scenario
from trapsim.trace import parse_trace, render
from trapsim.verifier import (
    CHECKS,
    FAIL,
    INDETERMINATE,
    NOT_APPLICABLE,
    PASS,
    RunRecord,
    Verdict,
    check_equivalence,
    check_sigma_dichotomy,
    digest,
    digest_lines,
    fibre,
    run_checks,
    settledness,
)

INJURY = scenario("""
stages: 150
slots:
  - slot: D n=0
    phi: [[1, 0, 100]]
""")
QUICK = scenario("""
stages: 40
slots:
  - slot: D n=0
    phi: [[1, 3, 2]]
""")
# checks that a sparse drive cannot satisfy: it skips stages and visits on purpose,
# so the visit protocol and a re-run of the scenario do not match it
SPARSE_EXEMPT = {"visit_order", "trace_replay", "equivalence"}


def record(state):
    return RunRecord.from_run(state.scenario, state.trace)


def statuses(rec, names=("all",)):
    return {v.name: v.status for v in run_checks(rec, names)}


def status(rec, name):
    return run_checks(rec, [name])[0]


@pytest.fixture(scope="module")
def injury():
    state, trace = run(INJURY)
    return state, RunRecord.from_run(INJURY, trace)


@pytest.fixture(scope="module")
def empty():
    sc = Scenario(stages=64, horizon=32)
    state, trace = run(sc)
    return state, RunRecord.from_run(sc, trace)


@pytest.fixture(scope="module")
def sparse():
    return {
        "collision": record(collision_state()),
        "exit_out": record(trap_notin_state()),
        "exit_in": record(trap_in_state()),
        "loops": record(loop_state(4)),
        "block": record(block_state()),
    }


# healthy runs


@pytest.mark.parametrize("fixture", ["injury", "empty"])
def test_full_runs_pass_everything(fixture, request):
    _, rec = request.getfixturevalue(fixture)
    for v in run_checks(rec, ["all"]):
        assert v.ok, v.line()


def test_quick_diagonal_and_empty_trace_pass():
    state, trace = run(QUICK)
    assert all(v.ok for v in run_checks(RunRecord.from_run(QUICK, trace)))
    rec = RunRecord.from_run(Scenario(stages=0), [])
    verdicts = run_checks(rec)
    assert all(v.ok for v in verdicts)
    assert {v.name: v.status for v in verdicts}["write_once"] == PASS


def test_replay_reproduces_the_engine_snapshot(injury, empty):
    import json

    for state, rec in (injury, empty):
        assert rec.snapshot() == json.loads(json.dumps(state.snapshot()))
        assert run_checks(rec, ["trace_replay"], snapshot=state.snapshot())[0].status == PASS


def test_snapshot_mismatch_is_reported(injury):
    state, rec = injury
    snap = state.snapshot()
    snap["A"] = []
    v = run_checks(rec, ["trace_replay"], snapshot=snap)[0]
    assert v.status == FAIL and "['A']" in v.witnesses[0]


@pytest.mark.parametrize("name", ["collision", "exit_out", "exit_in", "loops", "block"])
def test_sparse_drives_pass_their_checks(name, sparse):
    got = statuses(sparse[name], [n for n in CHECKS if n not in SPARSE_EXEMPT])
    assert all(s in (PASS, NOT_APPLICABLE) for s in got.values()), got


def test_branch_specific_verdicts(sparse):
    assert statuses(sparse["collision"])["collision_witness"] == PASS
    assert statuses(sparse["collision"])["defeat_witness"] == NOT_APPLICABLE
    v = status(sparse["exit_out"], "defeat_witness")
    assert v.status == PASS and "x_v in W, y_v not in B" in v.detail
    v = status(sparse["exit_in"], "defeat_witness")
    assert v.status == PASS and "x_v not in W, y_v in B" in v.detail
    assert status(sparse["exit_in"], "collision_witness").status == NOT_APPLICABLE
    assert status(sparse["block"], "block_atomicity").detail == "1 block actions"


def test_fibre_growth(sparse):
    rec = sparse["loops"]
    v = status(rec, "fibre_growth")
    assert v.status == PASS and v.detail == "fibre sizes R:l=0,m=0,k=0:4"
    (r,) = rec.r_runs
    assert fibre(r) == [0, 1, 2, 3]
    assert status(sparse["exit_out"], "fibre_growth").status == NOT_APPLICABLE


def test_sigma_on_tied_baits(sparse):
    rec = sparse["loops"]
    (r,) = rec.r_runs
    assert all(rec.sigma(0, a) == A1 for a in r.baits[:4])
    assert rec.b_member(0, TRAP) is False


def test_equivalence_on_a_settled_window(empty):
    _, rec = empty
    v = check_equivalence(rec)
    assert v.status == PASS and v.detail.startswith("H=32")
    assert settledness(rec, 0, 32) == (True, "")


def test_equivalence_is_indeterminate_while_maps_are_partial(empty):
    _, rec = empty
    v = check_equivalence(rec, m=0, horizon=200)
    assert v.status == INDETERMINATE


def test_equivalence_is_indeterminate_while_a_live_requirement_holds_the_window():
    sc = scenario("stages: 12\nhorizon: 4\nslots:\n  - slot: D n=0\n    phi: [[1, 0, 30]]\n")
    _, trace = run(sc)
    v = check_equivalence(RunRecord.from_run(sc, trace), m=0)
    assert v.status == INDETERMINATE and "phi(1)" in v.witnesses[0]


def test_sigma_dichotomy_all_private(empty):
    _, rec = empty
    v = check_sigma_dichotomy(rec, horizon=32)
    assert v.status == PASS and "private" in v.detail


def test_verdict_line_and_dict():
    v = Verdict("write_once", FAIL, [f"w{i}" for i in range(10)], "detail")
    assert v.line().startswith("write_once           fail  detail  [w0; ")
    assert v.line().endswith("; +2 more]")
    assert v.asdict()["witnesses"][9] == "w9"
    assert not v.ok and Verdict("x", NOT_APPLICABLE).ok


def test_unknown_check_name(injury):
    _, rec = injury
    with pytest.raises(KeyError):
        run_checks(rec, ["no_such_check"])


def test_digest_is_stable_over_the_text_roundtrip(injury):
    state, rec = injury
    scenario_dict, events = parse_trace(render(rec.scenario_dict, rec.events))
    assert digest(digest_lines(events)) == digest(digest_lines(state.trace))


# fault injection: each check fails on its own corrupted trace


def corrupt(rec, events):
    return RunRecord.from_trace(rec.scenario_dict, renumber(events))


def test_duplicate_define_fails_write_once(injury):
    _, rec = injury
    i = find(rec.events, "fill1", m=0, z=1)
    ev = rec.events[i]
    bad = insert_event(rec.events, i + 1, ev.stage, "filler", "fill1", (0, 1))
    v = status(corrupt(rec, bad), "write_once")
    assert v.status == FAIL and str(ev.seq) in v.witnesses[0] and str(ev.seq + 1) in v.witnesses[0]


def test_double_tie_fails_sigma_dichotomy(sparse):
    rec = sparse["block"]
    i = find(rec.events, "define_theta", key=A1)
    ev = rec.events[i]
    # the same run ties a_1 a second time, to a different value
    bad = insert_event(rec.events, i + 1, ev.stage, ev.author, "define_theta", (0, A1, A2))
    assert check_sigma_dichotomy(rec, horizon=A1).status == PASS
    assert check_sigma_dichotomy(corrupt(rec, bad), horizon=A1).status == FAIL


def test_split_block_enumeration_fails_atomicity(sparse):
    rec = sparse["block"]
    i = find(rec.events, "enumerate", x=A2)
    ev = rec.events[i]
    moved = rec.events[:i] + rec.events[i + 1:]
    moved.append(rec.events[0]._replace(stage=ev.stage + 1, author="engine", kind="begin", values=()))
    moved.append(ev._replace(stage=ev.stage + 1, kind="visit", values=()))
    moved.append(ev._replace(stage=ev.stage + 1))
    v = status(corrupt(rec, moved), "block_atomicity")
    assert v.status == FAIL


def test_frozen_filler_action_fails_freeze_respect(injury):
    _, rec = injury
    i = find(rec.events, "freeze", z=1539)
    # clause 2a acting on R_0's frozen bait during the same stage's filler pass
    j = next(k for k in range(i, len(rec.events)) if rec.events[k].author == "filler")
    stage = rec.events[j].stage
    bad = insert_event(rec.events, j, stage, "filler", "fill2a", (0, 1539, 10**12))
    v = status(corrupt(rec, bad), "freeze_respect")
    assert v.status == FAIL and "frozen" in v.witnesses[0]


def test_spurious_initialize_fails_injury_bound(injury):
    _, rec = injury
    i = next(k for k, ev in enumerate(rec.events) if ev.kind == "visit" and ev.stage == 5)
    bad = insert_event(rec.events, i + 1, 5, "D:n=0", "initialize", (3,))
    v = status(corrupt(rec, bad), "injury_bound")
    assert v.status == FAIL and "without a terminal action" in v.witnesses[0]


def test_unfreeze_before_tie_fails(sparse):
    rec = sparse["exit_out"]
    i = find(rec.events, "define_theta", key=A1)
    events = list(rec.events)
    events[i], events[i + 1] = events[i + 1], events[i]
    assert status(corrupt(rec, events), "tie_before_unfreeze").status == FAIL


def test_early_oracle_answer_fails_stage_convention(sparse):
    rec = sparse["exit_out"]
    i = find(rec.events, "eval_Phi")
    bad = replace_event(rec.events, i, values=(1, 5, 11))
    v = status(corrupt(rec, bad), "stage_convention")
    assert v.status == FAIL and "not visible" in v.witnesses[0]
    i = find(rec.events, "eval_delta")
    bad = replace_event(rec.events, i, stage=3)
    assert status(corrupt(rec, bad), "stage_convention").status == FAIL


def test_second_anchor_preimage_fails_anchor_uniqueness(sparse):
    rec = sparse["exit_out"]
    i = find(rec.events, "define_lambda")
    ev = rec.events[i]
    bad = insert_event(rec.events, i + 1, ev.stage, ev.author, "define_lambda", (0, TRAP + 1, A1))
    assert status(corrupt(rec, bad), "anchor_uniqueness").status == FAIL


def test_skipped_visit_fails_visit_order(injury):
    _, rec = injury
    i = next(k for k, ev in enumerate(rec.events) if ev.kind == "visit" and ev.stage == 3 and ev.author == "D:n=1")
    bad = rec.events[:i] + rec.events[i + 1:]
    v = status(corrupt(rec, bad), "visit_order")
    assert v.status == FAIL and "priority 2 not visited" in v.witnesses[0]


def test_swapped_filler_pairs_fail_filler_order(empty):
    _, rec = empty
    i = find(rec.events, "fill1", m=0, z=1)
    events = list(rec.events)
    events[i], events[i + 1] = events[i + 1], events[i]
    assert status(corrupt(rec, events), "filler_order").status == FAIL


def test_foreign_column_enumeration_fails_provenance(injury):
    _, rec = injury
    i = find(rec.events, "enumerate")
    bad = replace_event(rec.events, i, values=(A1,))
    assert status(corrupt(rec, bad), "column_provenance").status == FAIL


def test_stale_bait_fails_freshness(injury):
    _, rec = injury
    i = find(rec.events, "bait")
    bad = replace_event(rec.events, i, values=(1, A1))
    assert status(corrupt(rec, bad), "freshness").status == FAIL


def test_collision_witness_detects_a_fake_collision(sparse):
    rec = sparse["collision"]
    i = find(rec.events, "enumerate")
    bad = rec.events[:i] + rec.events[i + 1:]
    assert status(corrupt(rec, bad), "collision_witness").status == FAIL


def test_defeat_witness_detects_a_wrong_branch(sparse):
    rec = sparse["exit_in"]
    i = find(rec.events, "satisfied", branch=3)
    bad = replace_event(rec.events, i, values=(2,))
    assert status(corrupt(rec, bad), "defeat_witness").status == FAIL


def test_repeated_fibre_input_fails_fibre_growth(sparse):
    rec = sparse["loops"]
    i = find(rec.events, "eval_Phi", v=2)
    bad = replace_event(rec.events, i, values=(2, 0, TRAP))
    assert status(corrupt(rec, bad), "fibre_growth").status == FAIL


def test_membership_mismatch_fails_equivalence(empty):
    _, rec = empty
    # give 4 the sigma-image 1 instead of privatizing it, then put 4 alone into A
    i = find(rec.events, "fill1", m=0, z=4)
    ev = rec.events[i]
    author = "R:l=0,m=0,k=0"
    events = rec.events[:i] + [
        ev._replace(author=author, kind="define_theta", values=(0, 4, 10**12)),
        ev._replace(author=author, kind="define_lambda", values=(0, 10**12, 1)),
    ] + rec.events[i + 1:]
    events.append(events[-1]._replace(author="D:n=1", kind="enumerate", values=(4,)))
    v = check_equivalence(corrupt(rec, events), m=0, horizon=8)
    assert v.status == FAIL and "x=4" in v.witnesses[0]


def test_tampered_trace_fails_replay(injury):
    _, rec = injury
    i = find(rec.events, "witness")
    bad = replace_event(rec.events, i, values=(4,))
    assert status(corrupt(rec, bad), "trace_replay").status == FAIL


def test_every_check_has_a_failing_fault():
    # guard that the fault tests above cover the whole registry
    covered = {
        "write_once", "sigma_dichotomy", "block_atomicity", "injury_bound", "fibre_growth",
        "defeat_witness", "collision_witness", "freeze_respect", "tie_before_unfreeze",
        "stage_convention", "anchor_uniqueness", "visit_order", "filler_order",
        "column_provenance", "freshness", "trace_replay", "equivalence",
    }
    assert covered == set(CHECKS)
