"""
Tests for the run-directory writer
"""
import json
import math

import numpy as np
import pytest

from processors.diagnostics import BalanceReport, compute_record
from processors.output_writer import (
    ABORT_FILE,
    COLUMN_UNITS,
    DIAGNOSTICS_FILE,
    OutputWriter,
    diagnostics_frame,
    read_diagnostics,
    read_snapshots,
)
from shared.exceptions import OutputError


@pytest.fixture
def writer(tmp_path):
    writer = OutputWriter(tmp_path / 'run')
    writer.prepare()
    return writer


@pytest.fixture
def records(bump):
    return [compute_record(bump, 0.0, with_dissipation=False), compute_record(bump * 0.5, 0.25, with_dissipation=False)]


class TestDiagnosticsFrame:
    def test_balance_columns_are_nan_without_balance(self, records):
        frame = diagnostics_frame(records)
        assert list(frame.columns) == list(COLUMN_UNITS)
        assert frame['balance_residual'].isna().all()

    def test_balance_length_must_match(self, records):
        report = BalanceReport(t=0.0, lhs=1.0, rhs=1.0, residual=0.0, relative_residual=0.0)
        with pytest.raises(OutputError, match="Balance series"):
            diagnostics_frame(records, [report])


class TestOutputWriter:
    def test_units_declared_before_header(self, writer, records):
        path = writer.write_diagnostics(records)
        lines = path.read_text().splitlines()
        declared = [line for line in lines if line.startswith('#')]
        assert len(declared) == len(COLUMN_UNITS)
        assert declared[0] == "# t [time]: simulation time"
        assert lines[len(declared)].startswith('t,sup_f,')

    def test_full_precision_read_back(self, writer, records):
        writer.write_diagnostics(records)
        frame = read_diagnostics(writer.run_dir)
        assert frame['l2_sq'].tolist() == [record.l2_sq for record in records]
        assert frame['t'].tolist() == [0.0, 0.25]
        assert math.isnan(frame['dissipation'][0])

    def test_every_digit_survives(self, writer, bump):
        scales = np.random.default_rng(7).uniform(0.1, 1.0, 40)
        records = [compute_record(bump * a, 0.01 * i, with_dissipation=False) for i, a in enumerate(scales)]
        writer.write_diagnostics(records)
        frame = read_diagnostics(writer.run_dir)
        for column in ("sup_f", "l2_sq", "l1", "wiener1"):
            assert frame[column].tolist() == [getattr(record, column) for record in records]

    def test_snapshots(self, writer, bump):
        paths = writer.write_snapshots([0.0, 0.5], [bump, bump * 2.0])
        assert [path.name for path in paths] == ['snapshot_00000.txt', 'snapshot_00001.txt']
        assert paths[0].read_text().startswith('# t = 0.00000000000000000e+00')
        data = read_snapshots(writer.run_dir)
        assert np.array_equal(data[1][:, 1], bump.values * 2.0)
        assert np.array_equal(data[0][:, 0], bump.spec.x)

    def test_state_dump(self, writer, bump):
        path = writer.write_state_dump(bump, 0.3)
        assert path.name == ABORT_FILE
        assert 'last finite state' in path.read_text().splitlines()[0]

    def test_json_is_sorted_and_handles_numpy(self, writer):
        path = writer.write_summary({'b': np.float64(1.5), 'a': np.arange(3), 'path': writer.run_dir})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text)['a'] == [0, 1, 2]

    def test_unserializable_metadata(self, writer):
        with pytest.raises(OutputError, match="Cannot write"):
            writer.write_metadata({'bad': object()})

    def test_missing_diagnostics(self, tmp_path):
        with pytest.raises(OutputError, match="No diagnostics file"):
            read_diagnostics(tmp_path)

    def test_prepare_creates_directories(self, writer):
        assert (writer.run_dir / 'snapshots').is_dir()
        assert not (writer.run_dir / DIAGNOSTICS_FILE).exists()
