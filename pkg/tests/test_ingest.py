"""Parsing, validation, daily deduplication, and distinct counting."""

import itertools
import random

import pytest

from crowdcdr import ingest, synth
from crowdcdr.errors import IngestError, SchemaError
from crowdcdr.ingest import (
    DEFAULT_WINDOW,
    IngestReport,
    StudyWindow,
    count_unique_handsets,
    dedupe_daily,
    parse_cdr,
    write_cdr,
)
from helpers import cdr_text, make_event, ts_on_day


def parse_all(text, **kwargs):
    return list(parse_cdr(text.encode(), **kwargs))


class TestParse:
    def test_three_clean_rows_give_three_events(self):
        events = [make_event(day=d, caller=100 + d) for d in (1, 2, 3)]
        report = IngestReport()
        out = parse_all(cdr_text(events), report=report)
        assert out == events
        assert report.rows == 3
        assert report.accepted == 3
        assert report.rejected == 0

    def test_text_with_nonzero_duration_rejected(self):
        good = make_event(day=1)
        bad = make_event(day=2, kind="text")
        text = cdr_text([good, bad]).replace("text,0", "text,12")
        report = IngestReport()
        out = parse_all(text, report=report)
        assert out == [good]
        assert report.rejected == 1
        assert report.rejects["text_with_duration"] == 1

    def test_missing_required_column_raises_schema_error(self):
        text = cdr_text([make_event()])
        truncated = "\n".join(
            line.rsplit(",", 1)[0] for line in text.strip().splitlines()
        )
        with pytest.raises(SchemaError, match="callee_is_customer"):
            parse_all(truncated)

    def test_empty_source_raises_schema_error(self):
        with pytest.raises(SchemaError, match="header"):
            parse_all("")

    def test_column_map_allows_renamed_headers(self):
        ev = make_event()
        text = cdr_text([ev]).replace("timestamp", "ts_epoch")
        schema = {f: f for f in ingest.CDR_COLUMNS}
        schema["timestamp"] = "ts_epoch"
        assert parse_all(text, schema=schema) == [ev]

    def test_extra_columns_ignored(self):
        ev = make_event()
        lines = cdr_text([ev]).strip().splitlines()
        text = lines[0] + ",extra\n" + lines[1] + ",junk\n"
        assert parse_all(text) == [ev]

    def test_unparseable_rows_above_tolerance_raise(self):
        rows = [cdr_text([make_event()]).strip().splitlines()[0]]
        rows += ["garbage,row,%d" % i for i in range(50)]
        with pytest.raises(IngestError, match="unparseable"):
            parse_all("\n".join(rows) + "\n")

    def test_unparseable_rows_below_tolerance_counted(self):
        events = [make_event(day=d % 80 + 1, caller=d) for d in range(200)]
        lines = cdr_text(events).strip().splitlines()
        lines.insert(5, "not,a,real,row")
        report = IngestReport()
        out = parse_all("\n".join(lines) + "\n", report=report)
        assert len(out) == 200
        assert report.rejects["unparseable"] == 1

    def test_event_outside_window_rejected(self):
        late = make_event(timestamp=DEFAULT_WINDOW.end + 5)
        report = IngestReport()
        assert parse_all(cdr_text([late]), report=report) == []
        assert report.rejects["outside_window"] == 1

    def test_unknown_tower_rejected_when_tower_set_given(self):
        ev = make_event(tower=99)
        report = IngestReport()
        out = parse_all(cdr_text([ev]), known_towers={1, 2, 3}, report=report)
        assert out == []
        assert report.rejects["unknown_tower"] == 1

    def test_event_with_no_customer_party_rejected(self):
        ev = make_event(caller_customer=False, callee_customer=False)
        report = IngestReport()
        assert parse_all(cdr_text([ev]), report=report) == []
        assert report.rejects["no_customer_party"] == 1

    def test_customer_with_unknown_state_rejected(self):
        ev = make_event(caller_state=0)
        report = IngestReport()
        assert parse_all(cdr_text([ev]), report=report) == []
        assert report.rejects["customer_without_state"] == 1

    def test_long_stream_is_consumed_lazily(self):
        """A million-row source yields early events after a handful of reads."""

        class CountingSource:
            def __init__(self, n_rows):
                self.n_rows = n_rows
                self.lines_served = 0

            def read(self, n=-1):
                return ""

            def __iter__(self):
                yield cdr_text([]).strip() + "\n"
                for i in range(self.n_rows):
                    self.lines_served += 1
                    yield (
                        f"{ts_on_day(i % 90 + 1)},{i},200,call,30,1,2,3,1,1\n"
                    )

        source = CountingSource(1_000_000)
        first_five = list(itertools.islice(parse_cdr(source), 5))
        assert len(first_five) == 5
        assert source.lines_served < 100

    def test_roundtrip_through_canonical_form(self, tmp_path):
        events = [
            make_event(day=3, caller=7, kind="text"),
            make_event(day=1, caller=5, callee_customer=False, callee_state=0),
            make_event(day=90, caller=9, tower=44, duration=301),
        ]
        path = tmp_path / "events.csv"
        write_cdr(events, path)
        assert list(parse_cdr(path)) == events
        path2 = tmp_path / "events2.csv"
        write_cdr(parse_cdr(path), path2)
        assert path2.read_bytes() == path.read_bytes()


class TestDedupe:
    def test_keeps_tower_of_earliest_event(self):
        events = [
            make_event(day=3, offset=8 * 3600, caller=1, tower=5),
            make_event(day=3, offset=9 * 3600, caller=1, tower=9),
        ]
        obs = dedupe_daily(events)
        assert len(obs) == 1
        assert obs[0].first_tower == 5
        assert obs[0].day == 3

    def test_two_days_give_two_observations(self):
        events = [make_event(day=3, caller=1), make_event(day=4, caller=1)]
        assert [o.day for o in dedupe_daily(events)] == [3, 4]

    def test_equal_timestamps_tie_to_smaller_tower(self):
        events = [
            make_event(day=2, offset=60, caller=1, tower=9),
            make_event(day=2, offset=60, caller=1, tower=5),
        ]
        assert dedupe_daily(events)[0].first_tower == 5

    def test_result_is_independent_of_input_order(self):
        events = [
            make_event(day=d, offset=o, caller=c, tower=t)
            for d in (1, 2)
            for o, t in ((30, 8), (30, 2), (45, 1))
            for c in (10, 11)
        ]
        expected = dedupe_daily(sorted(events, key=lambda e: e.timestamp))
        rng = random.Random(0)
        for _ in range(5):
            shuffled = events[:]
            rng.shuffle(shuffled)
            assert dedupe_daily(shuffled) == expected

    def test_located_party_is_caller_when_customer_else_callee(self):
        caller_side = make_event(caller=1, callee=2)
        callee_side = make_event(
            caller=1, callee=2, caller_customer=False, caller_state=0
        )
        assert dedupe_daily([caller_side])[0].person_id == 1
        assert dedupe_daily([callee_side])[0].person_id == 2
        assert dedupe_daily([callee_side])[0].state_code == 3

    def test_empty_input_empty_output(self):
        assert dedupe_daily([]) == []

    def test_idempotent_on_reconstructed_events(self):
        events = [
            make_event(day=d, offset=o, caller=c, tower=t)
            for (d, o, c, t) in [
                (1, 10, 1, 3), (1, 20, 1, 9), (2, 5, 1, 7),
                (1, 15, 2, 4), (5, 0, 3, 2),
            ]
        ]
        obs = dedupe_daily(events)
        rebuilt = [
            make_event(day=o.day, caller=o.person_id, tower=o.first_tower,
                       caller_state=o.state_code)
            for o in obs
        ]
        again = dedupe_daily(rebuilt)
        assert [(o.person_id, o.day, o.first_tower) for o in again] == [
            (o.person_id, o.day, o.first_tower) for o in obs
        ]


class TestCounts:
    def test_one_person_three_days(self):
        events = [
            make_event(day=d, caller=1, caller_state=7) for d in (1, 2, 3)
        ]
        counts = count_unique_handsets(dedupe_daily(events))
        assert counts == {(7, 1): 1, (7, 2): 1, (7, 3): 1}

    def test_empty_input_empty_map(self):
        assert count_unique_handsets([]) == {}

    def test_counts_never_exceed_raw_events(self):
        rng = random.Random(3)
        events = [
            make_event(
                day=rng.randint(1, 10),
                offset=rng.randint(0, 86399),
                caller=rng.randint(1, 30),
                caller_state=rng.randint(1, 4),
                tower=rng.randint(1, 6),
            )
            for _ in range(400)
        ]
        raw = {}
        for ev in events:
            key = (ev.caller_state, DEFAULT_WINDOW.day_of(ev.timestamp))
            raw[key] = raw.get(key, 0) + 1
        counts = count_unique_handsets(dedupe_daily(events))
        assert all(counts[k] <= raw[k] for k in counts)

    def test_synthetic_cohort_matches_generator_bookkeeping(self):
        host = synth.StateSpec(1, "host", 400, 0.5, is_local=True, theta=0.0)
        away = synth.StateSpec(2, "away", 1000, 0.25, theta=0.4)
        config = synth.ScenarioConfig(seed=6, states=[host, away])
        truth = synth.generate_tables(config)
        events = synth.build_events(truth)
        counts = count_unique_handsets(dedupe_daily(events))
        assert counts == truth.observed_counts


class TestFullScenarioEquivalence:
    def test_parse_dedupe_count_reconstruct_ground_truth(self, desk_small_files):
        paths, truth = desk_small_files
        report = IngestReport()
        events = list(parse_cdr(paths["cdr"], report=report))
        assert report.rejected == 0
        obs = dedupe_daily(events)
        assert obs == truth.observations()
        assert count_unique_handsets(obs) == truth.observed_counts

    def test_reemitting_parsed_file_is_byte_stable(self, desk_small_files, tmp_path):
        paths, _ = desk_small_files
        out = tmp_path / "copy.csv"
        write_cdr(parse_cdr(paths["cdr"]), out)
        assert out.read_bytes() == paths["cdr"].read_bytes()


class TestAuxiliaryLoaders:
    def test_window_day_indexing(self):
        w = StudyWindow(start=1000, days=2)
        assert w.day_of(1000) == 1
        assert w.day_of(1000 + 86399) == 1
        assert w.day_of(1000 + 86400) == 2
        assert w.contains(1000)
        assert not w.contains(1000 + 2 * 86400)

    def test_tower_state_and_projection_files(self, desk_small_files):
        paths, truth = desk_small_files
        towers = ingest.load_towers(paths["towers"])
        assert [t.tower_id for t in towers] == [
            t.tower_id for t in truth.towers
        ]
        profiles = ingest.load_state_profiles(paths["states"])
        assert profiles == truth.profiles()
        assert ingest.local_state(profiles) == 1
        proj = ingest.load_projections(paths["projections"])
        assert sorted(proj) == [25, 35, 55, 75]

    def test_tower_activity_marking(self):
        events = [make_event(tower=2), make_event(tower=5)]
        towers = [
            ingest.TowerSite(t, 25.0, 81.0, True) for t in (1, 2, 5)
        ]
        marked = ingest.mark_tower_activity(
            towers, ingest.towers_with_traffic(events)
        )
        assert [(t.tower_id, t.active) for t in marked] == [
            (1, False), (2, True), (5, True)
        ]
