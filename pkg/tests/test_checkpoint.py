import os

import numpy as np
import pytest

from aximhd.checkpoint import (VERSION, CheckpointError, emit_records, read_checkpoint,
                               read_records, write_checkpoint)
from aximhd.diagnostics import DiagnosticRecord, Monitor, MonitorSettings
from aximhd.solver import SolverConfig, run

CFG = SolverConfig(Nr=32, Nz=32, T_end=0.05, cadence=2)
DIGEST = "ab" * 32


@pytest.fixture(scope="module")
def final_state():
    state, _ = run(CFG)
    return state


class TestCheckpoint:
    def test_bitwise_round_trip(self, tmp_path, final_state):
        path = tmp_path / "s.axmh"
        write_checkpoint(final_state, path, seed=7, digest=DIGEST, extra={"k": [1, 2.5]})
        state, seed, digest, extra = read_checkpoint(path, digest=DIGEST)
        assert seed == 7 and digest == DIGEST and extra == {"k": [1, 2.5]}
        assert state.t == final_state.t and state.step == final_state.step
        assert state.accum == final_state.accum
        for a, b in ((state.vort_ratio, final_state.vort_ratio),
                     (state.field_ratio, final_state.field_ratio)):
            assert a.tobytes() == b.tobytes()
        assert state.grid.shape == final_state.grid.shape

    def test_resumed_run_matches(self, tmp_path):
        cfg = SolverConfig(Nr=32, Nz=32, T_end=0.05, cadence=2, dt=0.005)
        path = tmp_path / "m.axmh"

        def save(s):
            if s.step == 5:
                write_checkpoint(s, path)

        straight, _ = run(cfg, on_step=save)
        resumed, _ = run(cfg, state=read_checkpoint(path)[0])
        assert resumed.vort_ratio.tobytes() == straight.vort_ratio.tobytes()
        assert resumed.field_ratio.tobytes() == straight.field_ratio.tobytes()
        assert resumed.step == straight.step and resumed.accum == straight.accum

    def _written(self, tmp_path, state):
        path = tmp_path / "c.axmh"
        write_checkpoint(state, path, digest=DIGEST)
        return path, path.read_bytes()

    def test_truncated(self, tmp_path, final_state):
        path, data = self._written(tmp_path, final_state)
        for cut in (10, len(data) - 8):
            path.write_bytes(data[:cut])
            with pytest.raises(CheckpointError):
                read_checkpoint(path)

    def test_bad_magic(self, tmp_path, final_state):
        path, data = self._written(tmp_path, final_state)
        path.write_bytes(b"XXXX" + data[4:])
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)

    def test_bad_version(self, tmp_path, final_state):
        path, data = self._written(tmp_path, final_state)
        path.write_bytes(data[:4] + (VERSION + 1).to_bytes(4, "little") + data[8:])
        with pytest.raises(CheckpointError, match="version"):
            read_checkpoint(path)

    def test_digest_mismatch(self, tmp_path, final_state):
        path, _ = self._written(tmp_path, final_state)
        with pytest.raises(CheckpointError, match="digest"):
            read_checkpoint(path, digest="cd" * 32)

    def test_atomic_write_leaves_no_temporary(self, tmp_path, final_state):
        self._written(tmp_path, final_state)
        assert os.listdir(tmp_path) == ["c.axmh"]


class TestRecords:
    def _records(self):
        mon = Monitor(MonitorSettings())
        _, recs = run(CFG, hooks=(mon,))
        return mon, recs

    def test_empty_run_is_header_only(self, tmp_path):
        mon = Monitor(MonitorSettings())
        path = tmp_path / "d.csv"
        emit_records([], path, mon.columns)
        assert path.read_text().count("\n") == 1
        cols, rows = read_records(path)
        assert cols == list(mon.columns) and rows == []

    def test_reparse_equals_memory(self, tmp_path):
        mon, recs = self._records()
        path = tmp_path / "d.csv"
        emit_records(recs, path, mon.columns)
        cols, rows = read_records(path)
        assert len(rows) == len(recs)
        for row, rec in zip(rows, recs):
            for c in cols:
                a, b = row[c], rec[c]
                assert (np.isnan(a) and np.isnan(b)) or a == b
        assert isinstance(rows[0]["step"], int)

    def test_byte_identical_runs(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            mon, recs = self._records()
            emit_records(recs, tmp_path / name, mon.columns)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_records_are_typed(self):
        _, recs = self._records()
        assert all(isinstance(r, DiagnosticRecord) for r in recs)
