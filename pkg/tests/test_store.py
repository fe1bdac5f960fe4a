"""Shared data tables: write-then-read, most-recent semantics, journals, export."""

import io
import math
import threading
from datetime import timedelta

import pytest

from rtapc.records import RecordError, STATUS_OK, now_utc
from rtapc.store import (
    DataStore,
    DimensionSpec,
    NoDataError,
    StoreError,
    TableKey,
)


@pytest.fixture
def store():
    s = DataStore()
    yield s
    s.close()


class TestInsertFloat:
    def test_write_then_read_identity(self, store):
        t0 = now_utc()
        store.insert_float("sensor", 1, t0, "ok", 1.5)
        r = store.read_recent_float("sensor", 1)
        assert (r.ts, r.status, r.value) == (t0, "ok", 1.5)

    def test_most_recent_wins(self, store):
        t0 = now_utc()
        store.insert_float("sensor", 1, t0, "ok", 1.0)
        store.insert_float("sensor", 1, t0 + timedelta(microseconds=1), "ok", 2.0)
        assert store.read_recent_float("sensor", 1).value == 2.0

    def test_nan_rejected(self, store):
        with pytest.raises(RecordError):
            store.insert_float("sensor", 1, now_utc(), "ok", math.nan)
        assert not store.has_series("sensor", 1)

    def test_unknown_table_auto_creates(self, store):
        store.insert_float("made.up-table", 7, now_utc(), "ok", 0.5)
        assert store.read_recent_float("made.up-table", 7).value == 0.5

    def test_index_must_be_positive(self, store):
        with pytest.raises(StoreError):
            store.insert_float("sensor", 0, now_utc(), "ok", 1.0)

    def test_bad_table_name_rejected(self, store):
        with pytest.raises(StoreError):
            store.insert_float("no|pipes", 1, now_utc(), "ok", 1.0)


class TestReadRecentMulti:
    def test_per_index_most_recent(self, store):
        t = now_utc()
        store.insert_float("actuator", 1, t, "ok", 0.1)
        store.insert_float("actuator", 1, t, "ok", 0.3)
        store.insert_float("actuator", 2, t, "ok", 0.7)
        values = [r.value for r in store.read_recent_multi_float("actuator", 2)]
        assert values == [0.3, 0.7]

    def test_missing_index_names_the_gap(self, store):
        t = now_utc()
        store.insert_float("actuator", 1, t, "ok", 0.1)
        store.insert_float("actuator", 2, t, "ok", 0.2)
        with pytest.raises(NoDataError) as exc_info:
            store.read_recent_multi_float("actuator", 3)
        assert exc_info.value.index == 3
        assert "actuator" in str(exc_info.value)

    def test_count_must_be_positive(self, store):
        with pytest.raises(StoreError):
            store.read_recent_multi_float("actuator", 0)


class TestIntTables:
    def test_opmode_most_recent(self, store):
        t = now_utc()
        store.insert_int("opmode", 1, t, "ok", 0)
        store.insert_int("opmode", 1, t, "ok", 1)
        assert store.read_recent_int("opmode", 1) == 1

    def test_dimension_table(self, store):
        t = now_utc()
        for i, n in enumerate((1, 1, 1), start=1):
            store.insert_int("dim", i, t, "ok", n)
        assert store.read_dimensions() == DimensionSpec(1, 1, 1)

    def test_empty_table_errors(self, store):
        with pytest.raises(NoDataError):
            store.read_recent_int("opmode", 1)

    def test_kind_mismatch_rejected(self, store):
        store.insert_int("opmode", 1, now_utc(), "ok", 1)
        with pytest.raises(StoreError):
            store.insert_float("opmode", 1, now_utc(), "ok", 1.0)
        with pytest.raises(StoreError):
            store.read_recent_float("opmode", 1)

    def test_float_value_rejected_for_int_insert(self, store):
        with pytest.raises(RecordError):
            store.insert_int("opmode", 1, now_utc(), "ok", 1.0)

    def test_dimension_counts_validated(self):
        with pytest.raises(ValueError):
            DimensionSpec(0, 1, 1)


class TestHistory:
    def test_read_all_preserves_insertion_order(self, store):
        t = now_utc()
        for v in (1.0, 2.0, 3.0):
            store.insert_float("sensor", 1, t, "ok", v)
        assert [r.value for r in store.read_all("sensor", 1)] == [1.0, 2.0, 3.0]

    def test_read_last_newest_first(self, store):
        t = now_utc()
        for v in range(5):
            store.insert_float("sensor", 1, t, "ok", float(v))
        values = [r.value for r in store.read_last("sensor", 1, 3)]
        assert values == [4.0, 3.0, 2.0]

    def test_read_last_zero_limit(self, store):
        store.insert_float("sensor", 1, now_utc(), "ok", 1.0)
        assert store.read_last("sensor", 1, 0) == []

    def test_read_all_unknown_key(self, store):
        with pytest.raises(NoDataError):
            store.read_all("sensor", 9)

    def test_keys_sorted(self, store):
        t = now_utc()
        store.insert_float("b", 2, t, "ok", 1.0)
        store.insert_float("a", 1, t, "ok", 1.0)
        store.insert_float("b", 1, t, "ok", 1.0)
        assert store.keys() == [TableKey("a", 1), TableKey("b", 1), TableKey("b", 2)]


class TestConcurrency:
    def test_interleaved_writers_match_replay_oracle(self, store):
        # two writers, three indices; the recorded history replayed through a
        # dict must agree with every most-recent read
        n_ops = 500
        barrier = threading.Barrier(2)

        def writer(writer_id: int):
            barrier.wait()
            for seq in range(n_ops):
                index = seq % 3 + 1
                value = writer_id * 1_000_000 + seq
                store.insert_float("actuator", index, now_utc(), "ok", float(value))

        threads = [threading.Thread(target=writer, args=(w,)) for w in (1, 2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        replay: dict[int, float] = {}
        seen_per_writer: dict[tuple[int, int], list[int]] = {}
        total = 0
        for index in (1, 2, 3):
            for r in store.read_all("actuator", index):
                replay[index] = r.value
                writer_id, seq = divmod(int(r.value), 1_000_000)
                seen_per_writer.setdefault((writer_id, index), []).append(seq)
                total += 1
            assert store.read_recent_float("actuator", index).value == replay[index]
        assert total == 2 * n_ops
        # per-writer order within each index follows program order
        for seqs in seen_per_writer.values():
            assert seqs == sorted(seqs)

    def test_reader_never_sees_torn_values(self, store):
        valid = {float(v) for v in range(2000)}
        stop = threading.Event()
        bad: list[float] = []

        def reader():
            while not stop.is_set():
                try:
                    v = store.read_recent_float("sensor", 1).value
                except NoDataError:
                    continue
                if v not in valid:
                    bad.append(v)

        t = threading.Thread(target=reader)
        t.start()
        for v in range(2000):
            store.insert_float("sensor", 1, now_utc(), "ok", float(v))
        stop.set()
        t.join()
        assert bad == []


class TestSubscriptions:
    def test_records_delivered_in_order(self, store):
        sub = store.subscribe([("sensor", 1)])
        t = now_utc()
        for v in (1.0, 2.0, 3.0):
            store.insert_float("sensor", 1, t, "ok", v)
        got = [sub.get(timeout=0.1) for _ in range(3)]
        assert [item[2].value for item in got] == [1.0, 2.0, 3.0]
        assert all(item[1] == TableKey("sensor", 1) for item in got)
        store.unsubscribe(sub)

    def test_filter_excludes_other_keys(self, store):
        sub = store.subscribe([("sensor", 1)])
        store.insert_float("actuator", 1, now_utc(), "ok", 9.0)
        assert sub.get(timeout=0.05) is None
        store.unsubscribe(sub)

    def test_overflow_emits_gap_marker(self, store):
        sub = store.subscribe([("sensor", 1)], maxlen=4)
        t = now_utc()
        for v in range(10):
            store.insert_float("sensor", 1, t, "ok", float(v))
        first = sub.get(timeout=0.1)
        assert first == ("gap", 6)
        second = sub.get(timeout=0.1)
        assert second[0] == "record" and second[2].value == 6.0
        store.unsubscribe(sub)

    def test_closed_subscription_returns_none(self, store):
        sub = store.subscribe()
        store.unsubscribe(sub)
        assert sub.get(timeout=0.05) is None
        store.insert_float("sensor", 1, now_utc(), "ok", 1.0)
        assert sub.get(timeout=0.05) is None


class TestJournal(object):
    def test_round_trip_through_directory(self, tmp_path):
        journal_dir = tmp_path / "journals"
        s1 = DataStore(journal_dir=journal_dir)
        t = now_utc()
        s1.insert_float("sensor", 1, t, "ok", 1.25)
        s1.insert_float("sensor", 1, t, "ok", 2.5)
        s1.insert_int("opmode", 1, t, "ok", 1)
        s1.close()

        assert (journal_dir / "sensor__1.journal").exists()
        assert (journal_dir / "opmode__1.journal").exists()

        s2 = DataStore(journal_dir=journal_dir)
        assert [r.value for r in s2.read_all("sensor", 1)] == [1.25, 2.5]
        assert s2.read_recent_int("opmode", 1) == 1
        s2.close()

    def test_journal_lines_use_record_grammar(self, tmp_path):
        s = DataStore(journal_dir=tmp_path)
        t = now_utc()
        s.insert_float("sensor", 2, t, "ok", -0.5)
        s.close()
        line = (tmp_path / "sensor__2.journal").read_text().strip()
        ts_text, status, value = line.split("|")
        assert len(ts_text) == 26
        assert status == "ok"
        assert value == "-0.5"

    def test_append_continues_existing_journal(self, tmp_path):
        s1 = DataStore(journal_dir=tmp_path)
        s1.insert_float("sensor", 1, now_utc(), "ok", 1.0)
        s1.close()
        s2 = DataStore(journal_dir=tmp_path)
        s2.insert_float("sensor", 1, now_utc(), "ok", 2.0)
        s2.close()
        s3 = DataStore(journal_dir=tmp_path)
        assert [r.value for r in s3.read_all("sensor", 1)] == [1.0, 2.0]
        s3.close()


class TestCsvExport:
    def test_header_and_rows(self, store):
        t = now_utc()
        store.insert_float("sensor", 1, t, "ok", 1.5)
        store.insert_int("opmode", 1, t, "ok", 1)
        out = io.StringIO()
        n = store.export_csv(out)
        lines = out.getvalue().splitlines()
        assert n == 2
        assert lines[0] == "table,index,timestamp,status,value"
        assert lines[1].startswith("opmode,1,")  # keys export in sorted order
        table, index, stamp, status, value = lines[2].split(",")
        assert (table, index, status, value) == ("sensor", "1", "ok", "1.5")
        assert len(stamp) == 26

    def test_unix_time_column(self, store):
        t = now_utc()
        store.insert_float("sensor", 1, t, "ok", 1.5)
        out = io.StringIO()
        store.export_csv(out, unix_time=True)
        stamp = out.getvalue().splitlines()[1].split(",")[2]
        assert abs(float(stamp) - t.timestamp()) < 1e-6
