import itertools
import statistics
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmusim.cachehier import AccessKind
from mmusim.errors import ParseError
from mmusim.workload import (
    Access,
    Switch,
    SynthConfig,
    SynthGenerator,
    format_event,
    parse_line,
    read_trace,
    synth_events,
    synth_next,
    write_trace,
)


def test_parse_examples():
    assert parse_line("A 2 D R 7f0012345678") == Access(2, AccessKind.DATA, False, 0x7F0012345678)
    assert parse_line("  A 0 I W 0x10  ") == Access(0, AccessKind.INSTRUCTION, True, 0x10)
    assert parse_line("S 1 7") == Switch(1, 7)
    assert parse_line("") is None
    assert parse_line("# comment") is None


@pytest.mark.parametrize("line", [
    "A 2 Q R 0", "A 2 D X 0", "A 2 D R", "A x D R 0", "A 2 D R zz", "S 1",
    "S 1 -2", "B 1 2", "A 1 D R 1ffffffffffffffff",
])
def test_parse_errors(line):
    with pytest.raises(ParseError) as exc:
        parse_line(line, 12)
    assert exc.value.lineno == 12
    assert "line 12" in str(exc.value)


events = st.one_of(
    st.builds(Access, st.integers(0, 64), st.sampled_from([AccessKind.DATA, AccessKind.INSTRUCTION]),
              st.booleans(), st.integers(0, (1 << 64) - 1)),
    st.builds(Switch, st.integers(0, 64), st.integers(0, 4096)),
)


@given(events)
def test_format_parse_round_trip(event):
    line = format_event(event)
    assert parse_line(line) == event
    assert format_event(parse_line("  " + line.replace(" ", "   ") + " ")) == line


def test_trace_file_round_trip(tmp_path):
    evs = list(synth_events(SynthConfig(seed=4, switch_period=10, threads=2), 200))
    path = tmp_path / "t.trace"
    assert write_trace(path, evs) == 200
    assert list(read_trace(path)) == evs


def test_trace_reports_line(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text("# hdr\nA 0 D R 10\n\nA 0 Z R 10\n")
    with pytest.raises(ParseError) as exc:
        list(read_trace(path))
    assert exc.value.lineno == 4


def test_same_seed_same_stream():
    cfg = SynthConfig(seed=9, page_locality="zipf", switch_period=7, threads=3)
    assert list(synth_events(cfg, 3000)) == list(synth_events(cfg, 3000))
    other = SynthConfig(seed=10, page_locality="zipf", switch_period=7, threads=3)
    assert list(synth_events(cfg, 3000)) != list(synth_events(other, 3000))


def test_synth_next_advances():
    gen = SynthGenerator(SynthConfig(seed=1))
    first = [synth_next(gen) for _ in range(5)]
    assert first == list(synth_events(SynthConfig(seed=1), 5))


@pytest.mark.slow
def test_footprint_bound_over_a_million_events():
    cfg = SynthConfig(seed=2, footprint_bytes=1 << 20)
    lo, hi = cfg.base_va, cfg.base_va + (1 << 20)
    assert all(lo <= e.va < hi for e in synth_events(cfg, 1_000_000))


@given(st.integers(1, 64), st.sampled_from(["uniform", "zipf"]), st.sampled_from(["random", "sequential"]))
def test_footprint_bound(pages, locality, intra):
    cfg = SynthConfig(seed=pages, footprint_bytes=pages * 4096, page_locality=locality, intra_page=intra)
    for e in synth_events(cfg, 500):
        assert cfg.base_va <= e.va < cfg.base_va + cfg.footprint_bytes
        if e.kind is AccessKind.DATA:
            assert e.va % 8 == 0


def test_zipf_head_beats_median():
    cfg = SynthConfig(seed=5, footprint_bytes=1024 * 4096, page_locality="zipf", zipf_s=1.0,
                      inst_ratio=0.0)
    counts = Counter(e.va >> 12 for e in synth_events(cfg, 100_000))
    per_page = [counts.get((cfg.base_va >> 12) + p, 0) for p in range(1024)]
    assert max(per_page) > statistics.median(per_page)


def test_sequential_offsets_advance():
    cfg = SynthConfig(seed=1, footprint_bytes=4096, intra_page="sequential", inst_ratio=0.0)
    offs = [e.va & 0xFFF for e in synth_events(cfg, 600)]
    assert offs[:3] == [0, 8, 16]
    assert offs[512] == 0  # wraps at the page end


def test_switch_period_and_rotation():
    cfg = SynthConfig(seed=3, switch_period=5, threads=2)
    evs = list(synth_events(cfg, 60))
    runs = [len(list(g)) for is_sw, g in itertools.groupby(evs, lambda e: isinstance(e, Switch))
            if not is_sw]
    assert runs[:-1] == [5] * (len(runs) - 1)
    sw = [e for e in evs if isinstance(e, Switch)]
    assert [(e.tid, e.asid) for e in sw[:4]] == [(0, 1), (1, 0), (0, 0), (1, 1)]


def test_instruction_ratio_and_round_robin():
    cfg = SynthConfig(seed=8, inst_ratio=0.5, threads=3)
    evs = list(synth_events(cfg, 3000))
    share = sum(e.kind is AccessKind.INSTRUCTION for e in evs) / len(evs)
    assert 0.45 < share < 0.55
    assert [e.tid for e in evs[:6]] == [0, 1, 2, 0, 1, 2]


@pytest.mark.parametrize("kwargs", [
    dict(footprint_bytes=100), dict(page_locality="pareto"), dict(page_locality="zipf", zipf_s=0),
    dict(intra_page="stride"), dict(inst_ratio=1.5), dict(threads=0), dict(switch_period=-1),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)
