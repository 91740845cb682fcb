import pytest

from trace_fixtures import make_trace_csv


@pytest.fixture
def trace_csv_path(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text(make_trace_csv())
    return path
