import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpumemlab.cache import ConfigError
from gpumemlab.hierarchy import HierarchySim
from gpumemlab.pchase import CacheSim, PChaseConfig, UniformStride, latency_spectrum, run_fine_grained
from gpumemlab.presets import list_presets, load_cache, load_device, preset_path
from gpumemlab.traceio import (TraceFormatError, config_from_text, config_to_text, format_size,
                               parse_size, read_config, read_report, read_trace, report_to_text,
                               trace_from_text, trace_to_text, write_report, write_trace)


@pytest.mark.parametrize("kind", ["caches", "devices", "gpus"])
def test_presets_round_trip_byte_identical(kind):
    for name in list_presets(kind):
        path = preset_path(kind, name)
        text = path.read_text()
        assert config_to_text(config_from_text(text)) == text


def test_cache_round_trip_equal():
    for name in list_presets("caches"):
        cfg = load_cache(name)
        assert config_from_text(config_to_text(cfg)) == cfg


@given(st.integers(0, 1 << 40))
def test_size_round_trip(n):
    assert parse_size(format_size(n)) == n


def test_size_units():
    assert parse_size("12 KB") == 12288
    assert parse_size("2 MB") == 2 << 20
    assert parse_size(32) == 32
    with pytest.raises(ValueError):
        parse_size("12 parsecs")


TOY = config_to_text(load_cache("toy-fig3"))


def _error_for(text):
    with pytest.raises(ConfigError) as e:
        config_from_text(text, "x.yaml")
    return str(e.value)


def test_unknown_key_has_line():
    text = TOY + "colour: blue\n"
    n = len(TOY.splitlines()) + 1
    msg = _error_for(text)
    assert f"line {n}" in msg and "colour" in msg and msg.startswith("x.yaml")


def test_missing_field_named():
    text = "\n".join(l for l in TOY.splitlines() if not l.startswith("line_size"))
    assert "line_size" in _error_for(text)


def test_bad_version_and_kind():
    assert "version" in _error_for(TOY.replace("format_version: 1", "format_version: 9"))
    assert "kind" in _error_for(TOY.replace("kind: cache", "kind: teapot"))


def test_yaml_syntax_error_has_line():
    assert "line" in _error_for("kind: cache\n  bad: [\n")


def test_inconsistent_geometry_rejected():
    assert _error_for(TOY.replace("size: 48", "size: 64"))


def _toy_trace():
    return run_fine_grained(CacheSim(load_cache("toy-fig3")),
                            PChaseConfig(52, UniformStride(1), 39, preheat=False))


def test_trace_round_trip_byte_identical(tmp_path):
    tr = _toy_trace()
    p = tmp_path / "t.csv"
    write_trace(tr, p)
    back = read_trace(p)
    assert np.array_equal(back.index, tr.index)
    assert np.array_equal(back.latency, tr.latency)
    assert back.meta == tr.meta
    assert trace_to_text(back) == p.read_text()


def test_hierarchy_trace_round_trip():
    tr = run_fine_grained(HierarchySim(load_device("gtx780")), latency_spectrum())
    back = trace_from_text(trace_to_text(tr))
    assert np.array_equal(back.pattern, tr.pattern)
    assert np.array_equal(back.l2_tlb_hit, tr.l2_tlb_hit)
    assert trace_to_text(back) == trace_to_text(tr)


def _raw(tr, overhead=32, with_constant=True):
    meta = dataclasses.replace(tr.meta, overhead_applied=False, device="gtx780",
                               dep_chain_overhead=overhead if with_constant else 0)
    raw = dataclasses.replace(tr, latency=tr.latency + overhead, meta=meta)
    return trace_to_text(raw)


def test_overhead_subtracted_on_ingest():
    tr = _toy_trace()
    back = trace_from_text(_raw(tr))
    assert np.array_equal(back.latency, tr.latency)
    assert back.meta.overhead_applied


def test_overhead_from_device_lookup(tmp_path):
    tr = _toy_trace()
    p = tmp_path / "raw.csv"
    p.write_text(_raw(tr, with_constant=False))
    assert np.array_equal(read_trace(p).latency, tr.latency)


def test_overhead_missing_constant():
    with pytest.raises(TraceFormatError):
        trace_from_text(_raw(_toy_trace(), with_constant=False))


def test_row_count_mismatch():
    text = trace_to_text(_toy_trace())
    lines = text.splitlines()
    with pytest.raises(TraceFormatError, match="k=39"):
        trace_from_text("\n".join(lines[:-1]) + "\n")


def test_negative_latency_reports_line():
    lines = trace_to_text(_toy_trace()).splitlines()
    hdr = next(i for i, l in enumerate(lines) if l.startswith("iteration"))
    row = lines[hdr + 3].split(",")
    row[2] = "-5"
    lines[hdr + 3] = ",".join(row)
    with pytest.raises(TraceFormatError, match=f"line {hdr + 4}"):
        trace_from_text("\n".join(lines) + "\n")


def test_unknown_header_key():
    with pytest.raises(TraceFormatError, match="unknown key"):
        trace_from_text("# format_version=1\n# flavour=x\n")


def test_report_round_trip(tmp_path):
    rep = {"b": np.int64(3), "a": [np.float64(1.5), (1, 2)], "c": {"x": None}}
    p = tmp_path / "r.json"
    write_report(rep, p)
    assert read_report(p) == {"a": [1.5, [1, 2]], "b": 3, "c": {"x": None},
                              "format_version": 1}
    assert report_to_text(rep) == p.read_text()
