import numpy as np
import pytest

from belief_plots import EmptyTraceError, SchemaError, read_trace_csv

from trace_fixtures import make_trace_csv


def test_reads_well_formed_trace():
    data = read_trace_csv(make_trace_csv(n=4, m=3, horizon=10))
    assert data.n == 4 and data.m == 3
    assert data.beliefs.shape == (11, 4, 3)
    assert data.wake.shape == (11, 4)
    assert np.allclose(data.beliefs.sum(axis=2), 1.0, atol=1e-9)
    assert (data.wake[0] == 0).all()


def test_single_agent_single_hypothesis():
    text = "tick,agent,wake,y,belief_0\n0,0,0,1.0,1.0\n1,0,1,1.0,1.0\n"
    data = read_trace_csv(text)
    assert data.n == 1 and data.m == 1


def test_corrupted_header_rejected():
    text = make_trace_csv().replace("tick,agent,wake,y", "tick,node,wake,y", 1)
    with pytest.raises(SchemaError, match="header"):
        read_trace_csv(text)


def test_renamed_belief_column_rejected():
    text = make_trace_csv(m=3).replace("belief_2", "belief_z", 1)
    with pytest.raises(SchemaError, match="belief"):
        read_trace_csv(text)


def test_missing_promised_belief_column():
    # header promises three hypotheses but rows carry two values
    lines = make_trace_csv(n=2, m=3, horizon=2).splitlines()
    broken = [lines[0]] + [ln.rsplit(",", 1)[0] for ln in lines[1:]]
    with pytest.raises(SchemaError, match="fields"):
        read_trace_csv("\n".join(broken) + "\n")


def test_header_only_is_empty_trace():
    with pytest.raises(EmptyTraceError):
        read_trace_csv("tick,agent,wake,y,belief_0,belief_1\n")


def test_no_header_at_all():
    with pytest.raises(SchemaError):
        read_trace_csv("")


def test_non_numeric_cell():
    text = "tick,agent,wake,y,belief_0\n0,0,0,1.0,oops\n"
    with pytest.raises(SchemaError, match="line 2"):
        read_trace_csv(text)


def test_belief_sum_revalidated():
    text = (
        "tick,agent,wake,y,belief_0,belief_1\n"
        "0,0,0,1.0,0.5,0.5\n"
        "1,0,1,1.0,0.6,0.5\n"
    )
    with pytest.raises(SchemaError, match="sum"):
        read_trace_csv(text)
    # within tolerance is accepted
    ok = text.replace("0.6,0.5", "0.5000004,0.5")
    assert read_trace_csv(ok).n == 1


def test_missing_agent_row_detected():
    text = (
        "tick,agent,wake,y,belief_0,belief_1\n"
        "0,0,0,1.0,0.5,0.5\n"
        "0,1,0,1.0,0.5,0.5\n"
        "1,0,1,1.0,0.5,0.5\n"
    )
    with pytest.raises(SchemaError, match="missing row"):
        read_trace_csv(text)
