"""Checks for signal CSV streaming, configuration, and snapshots."""

import io as stdio
import json

import numpy as np
import pytest

from driveload import (
    EmissionModel,
    ForgettingPolicy,
    GalParams,
    OnlineHmmEstimator,
    load_snapshot,
    save_snapshot,
    stream_signal,
    write_signal_csv,
)
from driveload.io import (
    DataFormatError,
    RunConfig,
    emissions_from_dicts,
    emissions_to_dicts,
    write_ndjson,
)

EM2 = EmissionModel([GalParams(-1.0, 0.0, 1.0, 0.3), GalParams(1.0, 0.0, 1.0, 0.3)])


def read_all(path, **kw):
    chunks = list(stream_signal(path, **kw))
    y = np.concatenate([c.y for c in chunks])
    t = np.concatenate([c.t for c in chunks])
    state = (
        np.concatenate([c.state for c in chunks])
        if chunks[0].state is not None
        else None
    )
    return chunks, t, y, state


def test_roundtrip_exact_for_representable_values(tmp_path):
    path = tmp_path / "sig.csv"
    y = np.array([0.5, -1.25, 3.0, 0.0, -7.125])
    state = np.array([0, 1, 2, 1, 0])
    write_signal_csv(path, y, state=state)
    chunks, t, got, got_state = read_all(path)
    np.testing.assert_array_equal(got, y)
    np.testing.assert_array_equal(got_state, state)
    np.testing.assert_array_equal(t, np.arange(5.0))
    assert chunks[-1].n_rows == 5 and chunks[-1].n_bad == 0


def test_roundtrip_general_values_near_lossless(tmp_path, rng):
    # y is written with 9 significant digits, so round-tripping arbitrary
    # doubles is relative-1e-9 accurate rather than exact
    path = tmp_path / "sig.csv"
    y = rng.normal(size=500)
    speed = rng.uniform(0, 30, 500)
    write_signal_csv(path, y, speed=speed)
    chunks = list(stream_signal(path))
    np.testing.assert_allclose(chunks[0].y, y, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(chunks[0].speed, speed, rtol=1e-5)
    assert chunks[0].state is None


def test_state_column_is_one_based_on_disk(tmp_path):
    path = tmp_path / "sig.csv"
    write_signal_csv(path, [0.1, 0.2], state=[0, 2])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,y,state"
    assert lines[1].split(",")[2] == "1"
    assert lines[2].split(",")[2] == "3"
    # a zero on disk cannot be a valid 1-based label
    path.write_text("y,state\n0.1,0\n0.2,1\n")
    chunks = list(stream_signal(path, bad_row_limit=0.6))
    assert chunks[-1].n_bad == 1
    np.testing.assert_array_equal(chunks[0].state, [0])


def test_chunking(tmp_path):
    path = tmp_path / "sig.csv"
    write_signal_csv(path, np.arange(250, dtype=float) / 8)
    chunks = list(stream_signal(path, chunk_size=100))
    assert [c.y.size for c in chunks] == [100, 100, 50]
    assert [c.n_rows for c in chunks] == [100, 200, 250]
    y = np.concatenate([c.y for c in chunks])
    np.testing.assert_array_equal(y, np.arange(250) / 8)


def test_header_required(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("")
    with pytest.raises(DataFormatError, match="empty file"):
        list(stream_signal(path))
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DataFormatError, match="no 'y' column"):
        list(stream_signal(path))


def test_header_only_yields_one_empty_chunk(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("t,y\n")
    chunks = list(stream_signal(path))
    assert len(chunks) == 1
    assert chunks[0].y.size == 0
    assert chunks[0].n_rows == 0 and chunks[0].n_bad == 0


def test_malformed_rows_counted_not_fatal(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text(
        "t,y\n0,0.1\n1,oops\n2,0.3\n3,\n4,nan\n5,inf\n6,0.7\n"
    )
    chunks, t, y, _ = read_all(path, bad_row_limit=0.6)
    np.testing.assert_array_equal(y, [0.1, 0.3, 0.7])
    np.testing.assert_array_equal(t, [0, 2, 6])
    assert chunks[-1].n_rows == 7
    assert chunks[-1].n_bad == 4


def test_sparse_bad_rows_tolerated_at_default_limit(tmp_path):
    path = tmp_path / "sig.csv"
    rows = ["t,y"] + [f"{i},{'x' if i % 400 == 0 else 0.5}" for i in range(2000)]
    path.write_text("\n".join(rows) + "\n")
    chunks, _, y, _ = read_all(path, chunk_size=512)
    assert y.size == 1995
    assert chunks[-1].n_bad == 5
    assert chunks[-1].n_rows == 2000


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("y\n0.1\n\n\n0.2\n")
    chunks, _, y, _ = read_all(path)
    np.testing.assert_array_equal(y, [0.1, 0.2])
    assert chunks[-1].n_rows == 2 and chunks[-1].n_bad == 0


def test_short_row_malformed(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("t,y,state\n0,0.1,1\n1\n2,0.2,2\n")
    chunks, _, y, state = read_all(path, bad_row_limit=0.5)
    np.testing.assert_array_equal(y, [0.1, 0.2])
    np.testing.assert_array_equal(state, [0, 1])
    assert chunks[-1].n_bad == 1


def test_bad_fraction_aborts_mid_stream(tmp_path):
    path = tmp_path / "sig.csv"
    rows = ["t,y"]
    for i in range(2000):
        rows.append(f"{i},x" if i % 50 == 0 else f"{i},0.5")  # 2% malformed
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataFormatError, match="malformed"):
        list(stream_signal(path, chunk_size=100))


def test_bad_fraction_checked_at_eof_for_short_files(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("t,y\n0,0.1\n1,x\n2,y\n3,0.4\n")  # 50% bad of 4 rows
    with pytest.raises(DataFormatError, match="malformed"):
        list(stream_signal(path))


def test_bad_fraction_limit_adjustable(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("t,y\n0,0.1\n1,x\n2,0.3\n3,0.4\n")
    chunks, _, y, _ = read_all(path, bad_row_limit=0.5)
    np.testing.assert_array_equal(y, [0.1, 0.3, 0.4])


# --- run configuration -----------------------------------------------------


def test_runconfig_defaults():
    cfg = RunConfig()
    assert cfg.seed is None
    assert cfg.stride == 100
    assert cfg.burn_in == 50
    assert cfg.frame_size == 2000
    assert cfg.beta == (3.0, 5.0)
    assert cfg.speed_threshold == 10.0
    assert cfg.policy is None and cfg.emissions is None and cfg.q0 is None


def test_runconfig_roundtrip(tmp_path):
    cfg = RunConfig(
        seed=7,
        stride=50,
        burn_in=100,
        beta=(3.0,),
        policy=ForgettingPolicy.from_rk(0.9, 1000),
        emissions=EM2,
        q0=np.array([[0.9, 0.1], [0.2, 0.8]]),
    )
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = RunConfig.load(path)
    assert back.seed == 7 and back.stride == 50 and back.burn_in == 100
    assert back.beta == (3.0,)
    assert back.policy == cfg.policy
    assert back.emissions.states == EM2.states
    np.testing.assert_array_equal(back.q0, cfg.q0)


def test_runconfig_rejects_unknown_keys():
    with pytest.raises(DataFormatError, match="unknown config keys"):
        RunConfig.from_dict({"stride": 10, "girth": 3})


def test_runconfig_rejects_bad_version():
    with pytest.raises(DataFormatError, match="version"):
        RunConfig.from_dict({"version": 99})


def test_runconfig_load_errors(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(DataFormatError, match="invalid JSON"):
        RunConfig.load(path)
    path.write_text("[1, 2]")
    with pytest.raises(DataFormatError, match="JSON object"):
        RunConfig.load(path)


def test_runconfig_scalar_beta_accepted():
    cfg = RunConfig.from_dict({"beta": 4})
    assert cfg.beta == (4.0,)


def test_runconfig_override():
    cfg = RunConfig()
    assert cfg.override() is cfg
    assert cfg.override(stride=None) is cfg
    out = cfg.override(stride=10, seed=3)
    assert (out.stride, out.seed) == (10, 3)
    assert cfg.stride == 100  # original untouched


def test_data_format_error_is_value_error():
    assert issubclass(DataFormatError, ValueError)


# --- outputs ---------------------------------------------------------------


def test_write_ndjson_compact():
    buf = stdio.StringIO()
    write_ndjson(buf, {"a": 1, "b": [1.5, 2.0]})
    assert buf.getvalue() == '{"a":1,"b":[1.5,2.0]}\n'
    with pytest.raises(ValueError):
        write_ndjson(stdio.StringIO(), {"a": float("nan")})


def test_snapshot_file_roundtrip(tmp_path, rng):
    y = EM2.sample(rng.integers(0, 2, 400), rng)
    est = OnlineHmmEstimator(EM2, ForgettingPolicy.fixed(0.01), burn_in=20)
    est.run(y[:250])
    path = tmp_path / "snap.json"
    save_snapshot(est, path)
    clone = load_snapshot(path)
    np.testing.assert_array_equal(clone.q, est.q)
    np.testing.assert_array_equal(clone.phi, est.phi)
    np.testing.assert_array_equal(clone.rho, est.rho)
    assert clone.t == est.t
    # continuation after reload is bit-identical to the uninterrupted run
    est.run(y[250:])
    clone.run(y[250:])
    np.testing.assert_array_equal(clone.q, est.q)
    np.testing.assert_array_equal(clone.eta, est.eta)
    np.testing.assert_array_equal(clone.counters, est.counters)


def test_snapshot_rejects_bad_json(tmp_path):
    path = tmp_path / "snap.json"
    path.write_text("{oops")
    with pytest.raises(DataFormatError, match="snapshot"):
        load_snapshot(path)


def test_emissions_dict_roundtrip():
    d = emissions_to_dicts(EM2)
    assert d[0] == {"delta": -1.0, "mu": 0.0, "nu": 1.0, "sigma": 0.3}
    back = emissions_from_dicts(d)
    assert back.states == EM2.states
