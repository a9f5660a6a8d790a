import json
import math

import numpy as np
import pytest

from ionheat.errors import IonHeatError, SchemaError
from ionheat.inference import ScanPoint, SidebandScan
from ionheat.io import (
    POWER_LAW_HEADER,
    SCAN_HEADER,
    ResultDocument,
    format_scans,
    ingest_scans,
    parse_scans,
    quantity,
    read_table,
    scans_digest,
    write_scans,
)
from ionheat.simulate import Schedule, TruthParams, detuning_grid, simulate_dataset


@pytest.fixture(scope="module")
def scans(trap):
    sched = Schedule((0.0, 0.01, 0.02, 0.03), detuning_grid(8e4, 21), 300, seed=17)
    return simulate_dataset(trap, TruthParams(13, 0.05, 3.0), sched)


def test_header_is_exact():
    assert ",".join(SCAN_HEADER) == "delay_s,sideband,detuning_hz,shots,bright,probe_duration_s"


def test_round_trip(tmp_path, scans):
    path = tmp_path / "scans.csv"
    write_scans(scans, path)
    assert ingest_scans(path) == scans
    assert path.read_text() == format_scans(ingest_scans(path))


def test_ordering_is_canonical(scans):
    lines = format_scans(scans).splitlines()
    shuffled = [lines[0]] + list(np.random.default_rng(1).permutation(lines[1:]))
    assert parse_scans("\n".join(shuffled)) == scans


def test_bit_exact_floats():
    scan = SidebandScan(0.1 + 0.2, 3.5e-5, "blue", tuple(ScanPoint(1e6 / 3 + i, 10, i) for i in range(5)))
    back = parse_scans(format_scans([scan]))[0]
    assert back.delay == 0.1 + 0.2
    assert back.points[0].detuning == 1e6 / 3


def test_empty_data_warns():
    with pytest.warns(UserWarning):
        assert parse_scans(",".join(SCAN_HEADER) + "\n") == []


def test_bright_exceeds_shots_names_line():
    text = ",".join(SCAN_HEADER) + "\n0.0,red,0.0,300,12,3.5e-05\n0.0,red,100.0,300,301,3.5e-05\n"
    with pytest.raises(SchemaError, match="line 3"):
        parse_scans(text)


@pytest.mark.parametrize(
    "row, fragment",
    [
        ("0.0,green,0.0,300,1,3.5e-05", "sideband"),
        ("0.0,red,abc,300,1,3.5e-05", "detuning_hz"),
        ("0.0,red,0.0,3.5,1,3.5e-05", "shots"),
        ("0.0,red,0.0,300,1", "fields"),
        ("-1.0,red,0.0,300,1,3.5e-05", "delay_s"),
        ("0.0,red,nan,300,1,3.5e-05", "finite"),
    ],
)
def test_malformed_rows(row, fragment):
    with pytest.raises(SchemaError, match=fragment):
        parse_scans(",".join(SCAN_HEADER) + "\n" + row + "\n")


def test_bad_header():
    with pytest.raises(SchemaError):
        parse_scans("delay,sideband,detuning,shots,bright\n")


def test_minimal_header_needs_duration():
    text = "delay_s,sideband,detuning_hz,shots,bright\n0.0,blue,0.0,300,10\n"
    with pytest.raises(SchemaError):
        parse_scans(text)
    assert parse_scans(text, probe_duration=2e-5)[0].probe_duration == 2e-5


def test_duplicate_detuning_rejected():
    text = ",".join(SCAN_HEADER) + "\n0.0,red,0.0,300,1,3.5e-05\n0.0,red,0.0,300,2,3.5e-05\n"
    with pytest.raises(SchemaError):
        parse_scans(text)


def test_missing_file(tmp_path):
    with pytest.raises(IonHeatError):
        ingest_scans(tmp_path / "nope.csv")


def test_digest_tracks_content(scans):
    assert scans_digest(scans) == scans_digest(list(scans))
    assert scans_digest(scans) != scans_digest(scans[:-1])


def test_read_table(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("temperature_k,rate,sigma\n10,1.5,0.1\n20,2.5,0.2\n")
    np.testing.assert_array_equal(read_table(p, POWER_LAW_HEADER), [[10, 1.5, 0.1], [20, 2.5, 0.2]])
    p.write_text("T,rate,sigma\n")
    with pytest.raises(SchemaError):
        read_table(p, POWER_LAW_HEADER)


class TestResultDocument:
    def test_round_trip_lossless(self):
        body = {
            "a": quantity(np.float64(1 / 3), "s", 0.1),
            "b": quantity(float("inf"), "1"),
            "c": [np.int64(3), True, None, "x"],
            "m": np.eye(2),
        }
        doc = ResultDocument(body, "2026-01-01T00:00:00+00:00")
        text = doc.to_json()
        back = ResultDocument.from_json(text)
        assert back == doc
        assert back.to_json() == text
        assert back.generated_at == doc.generated_at
        assert json.loads(text)["b"]["value"] == "inf"

    def test_timestamp_excluded_from_equality(self):
        a = ResultDocument({"x": 1}, "2026-01-01")
        b = ResultDocument({"x": 1}, "2027-01-01")
        assert a == b
        assert a.to_json(include_timestamp=False) == b.to_json(include_timestamp=False)

    def test_source_date_epoch(self, monkeypatch):
        from ionheat.io import utc_timestamp

        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        assert utc_timestamp() == "1970-01-01T00:00:00+00:00"

    def test_rejects_foreign_json(self):
        with pytest.raises(SchemaError):
            ResultDocument.from_json('{"schema_version": 99}')
        with pytest.raises(SchemaError):
            ResultDocument.from_json("not json")

    def test_unsupported_value(self):
        with pytest.raises(IonHeatError):
            ResultDocument({"x": object()})

    def test_nan_encoded(self):
        doc = ResultDocument({"x": math.nan})
        assert '"nan"' in doc.to_json()
