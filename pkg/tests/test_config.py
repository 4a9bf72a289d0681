import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmusim.config import (
    SCHEMA,
    defaults,
    emit_config,
    format_size,
    parse_config,
    parse_config_text,
    parse_size,
)
from mmusim.engine import MachineConfig
from mmusim.errors import ConfigError
from mmusim.tlb import TABLE2_TLBS


def test_empty_file_is_default_machine():
    cfg = parse_config_text("")
    assert cfg.machine == MachineConfig()
    assert cfg.machine.l1d_tlb == TABLE2_TLBS["l1d"]
    assert cfg.machine.caches.l4.num_sets == 262_144
    assert cfg.trace is None and cfg.synth is not None
    assert cfg.sweep.l4_sizes == tuple(s << 20 for s in (64, 128, 256, 512, 1024))


def test_accepted_key_is_echoed():
    cfg = parse_config_text("tlb.l1d.entries = 64\n")
    assert ("tlb.l1d.entries", "64") in cfg.echo()


@pytest.mark.parametrize("text, key", [
    ("cache.l4.size = 100MiB", "cache.l4.size"),
    ("tlb.l1i.entrys = 3", "tlb.l1i.entrys"),
    ("tlb.l1d.entries = many", "tlb.l1d.entries"),
    ("tlb.l1d.entries = 64\ntlb.l1d.entries = 32", "tlb.l1d.entries"),
    ("walker.pwc.enabled = maybe", "walker.pwc.enabled"),
    ("cache.l1d.size = 1000", "cache.l1d.size"),
    ("tlb.super.page_size = 4KiB", "tlb.super.page_size"),
    ("walker.pwc.entries = 1,2", "walker.pwc.entries"),
    ("synth.page_locality = bursty", "synth"),
    ("engine.overlap = 2", "engine.base_cpi"),
    ("workload.trace = a.trace\nsynth.footprint = 1MiB", "synth.footprint"),
    ("no equals sign", "no equals sign"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.key == key


def test_sizes():
    assert parse_size("64MiB") == parse_size("64 MB") == parse_size("64m") == 64 << 20
    assert parse_size("0x1000") == 4096
    assert format_size(256 << 20) == "256MiB" and format_size(100) == "100"
    with pytest.raises(ValueError):
        parse_size("12 parsecs")


def test_comments_and_disabling():
    cfg = parse_config_text("# baseline without extras\ntlb.l2.entries = 0  # off\n"
                            "tlb.super.entries = 0\ncache.l4.enabled = false\n")
    assert cfg.machine.l2_tlb is None and cfg.machine.super_tlb is None
    assert cfg.machine.caches.l4 is None


def test_trace_workload(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("workload.trace = /data/x.trace\nengine.max_events = 5\n")
    cfg = parse_config(path)
    assert cfg.trace == "/data/x.trace" and cfg.synth is None
    assert cfg.engine.max_events == 5
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.cfg")


_VALUES = {
    "tlb.l1d.entries": st.sampled_from([16, 32, 64, 128]),
    "tlb.l2.entries": st.sampled_from([0, 512, 1024]),
    "walker.pwc.entries": st.sampled_from(["8", "4,8,16"]),
    "walker.walk_from_l2": st.sampled_from(["true", "false"]),
    "cache.l4.size": st.sampled_from(["64MiB", "1GiB", "128MiB"]),
    "cache.l4.block": st.sampled_from(["64", "512"]),
    "synth.footprint": st.sampled_from(["1MiB", "3MiB", "12288"]),
    "synth.page_locality": st.sampled_from(["uniform", "zipf"]),
    "synth.zipf_s": st.sampled_from(["0.5", "1.25"]),
    "engine.overlap": st.sampled_from(["0", "1/3", "0.5"]),
    "engine.max_events": st.sampled_from(["none", "10"]),
    "engine.seed": st.integers(0, 99).map(str),
    "sweep.l4.size": st.sampled_from(["64MiB", "64MiB,256MiB"]),
    "sweep.ideal_tlb": st.sampled_from(["false", "true,false"]),
}


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.sampled_from(sorted(_VALUES)), st.just(None)).flatmap(
    lambda keys: st.fixed_dictionaries({k: _VALUES[k] for k in keys})))
def test_parse_emit_round_trip(chosen):
    text = "".join(f"{k} = {v}\n" for k, v in chosen.items())
    cfg = parse_config_text(text)
    assert parse_config_text(emit_config(cfg)) == cfg
    assert parse_config_text(emit_config(cfg, only_changed=True)) == cfg


def test_every_key_has_parseable_default():
    cfg = parse_config_text(emit_config(parse_config_text("")))
    assert dict(cfg.settings) == defaults()
    assert set(dict(cfg.settings)) == set(SCHEMA)
