import pytest
from hypothesis import given, strategies as st

from trapsim.engine import run
from trapsim.scenario import Scenario
from trapsim.trace import (
    SCHEMA,
    Event,
    TraceFormatError,
    format_event,
    parse_event,
    parse_trace,
    read_trace,
    render,
    write_trace,
)

authors = st.sampled_from(["engine", "filler", "D:n=3", "R:l=4,m=1,k=1"])


@st.composite
def events(draw):
    kind = draw(st.sampled_from(sorted(SCHEMA)))
    values = tuple(draw(st.integers(0, 10**30)) for _ in SCHEMA[kind])
    return Event(draw(st.integers(0, 10**6)), draw(st.integers(0, 10**6)), draw(authors), kind, values)


def test_format_examples():
    assert format_event(Event(0, 0, "engine", "begin", ())) == "0 0 engine begin"
    assert format_event(Event(7, 1, "R:l=0,m=0,k=0", "bait", (1, 20))) == "7 1 R:l=0,m=0,k=0 bait v=1 a=20"
    assert format_event(Event(9, 3, "filler", "fill2a", (0, 5, 1539))) == "9 3 filler fill2a m=0 z=5 y=1539"


@given(events())
def test_event_roundtrip(ev):
    assert parse_event(format_event(ev)) == ev


def test_field_access():
    ev = Event(3, 21, "R:l=0,m=0,k=0", "exit", (1, 10, 10, 0))
    assert ev.field("c") == 10 and ev.asdict() == {"v": 1, "y": 10, "c": 10, "member": 0}


@pytest.mark.parametrize("line, message", [
    ("0 0 engine", "expected"),
    ("0 0 engine teleport", "unknown event kind"),
    ("0 0 D:n=0 witness", "expects fields"),
    ("0 0 D:n=0 witness y=1", "expected field x"),
    ("0 0 D:n=0 witness x=-1", "not a natural"),
    ("a 0 engine begin", "not a natural"),
])
def test_malformed_lines(line, message):
    with pytest.raises(TraceFormatError, match=message):
        parse_event(line, 5)


def test_wrong_arity_cannot_be_formatted():
    with pytest.raises(TraceFormatError):
        format_event(Event(0, 0, "filler", "fill1", (1,)))


def test_trace_roundtrip_through_a_file(tmp_path):
    scenario = Scenario(stages=12)
    _, trace = run(scenario)
    path = tmp_path / "t.trace"
    write_trace(path, scenario.to_dict(), trace)
    data = path.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    sc, evs = read_trace(path)
    assert sc == scenario.to_dict() and evs == trace
    assert render(sc, evs).encode() == data


def test_headers_are_required():
    with pytest.raises(TraceFormatError, match="line 1"):
        parse_trace("0 0 engine begin\n")
    with pytest.raises(TraceFormatError, match="line 2"):
        parse_trace("# trace v1\n0 0 engine begin\n")
    with pytest.raises(TraceFormatError, match="scenario JSON"):
        parse_trace("# trace v1\n# scenario {oops\n")


def test_bad_event_line_reports_its_line_number():
    text = render(Scenario(stages=1).to_dict(), []) + "0 0 engine begin\n1 0 engine nope\n"
    with pytest.raises(TraceFormatError, match="line 4"):
        parse_trace(text)
