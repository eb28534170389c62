import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from windcast.errors import (DegenerateFeatureError, EmptyDataError, InsufficientDataError,
                             SchemaError)
from windcast.ingest import (COLUMNS, ModelVariant, NormStats, build_supervised,
                             correlation_matrix, inverse_normalize, normalize, parse_csv,
                             split_indices, write_csv)
from windcast.synth import SynthConfig, TurbineSpec, generate

from conftest import make_series

HEADER = ",".join(COLUMNS)


def _row(ts, ws=5.0, wd=180.0, p=100.0):
    return f"{ts},{ws},{wd},{p},10,20,30,150"


def _write(tmp_path, lines, name="in.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parse_well_formed(tmp_path):
    path = _write(tmp_path, [HEADER, _row(0), _row(600), _row(1200)])
    s = parse_csv(path)
    assert len(s) == 3 and s.skipped == 0 and not s.resorted
    assert s.cadence == 600.0


def test_parse_skips_malformed_cell(tmp_path):
    path = _write(tmp_path, [HEADER, _row(0), "600,abc,180,1,10,20,30,150", _row(1200)])
    s = parse_csv(path)
    assert len(s) == 2 and s.skipped == 1


def test_parse_resorts_unsorted(tmp_path):
    stamps = [1800, 0, 1200, 600]
    path = _write(tmp_path, [HEADER] + [_row(t, p=t) for t in stamps])
    s = parse_csv(path)
    assert s.resorted
    assert s.timestamp.tolist() == sorted(stamps)
    # each record keeps its own values after sorting
    assert s["power"].tolist() == sorted(stamps)


def test_parse_iso_timestamps(tmp_path):
    path = _write(tmp_path, [HEADER, _row("2013-01-01T00:00:00Z"), _row("2013-01-01T00:10:00")])
    s = parse_csv(path)
    assert s.timestamp.tolist() == [1356998400.0, 1356999000.0]


def test_parse_missing_column(tmp_path):
    path = _write(tmp_path, ["timestamp,wind_speed", "0,1"])
    with pytest.raises(SchemaError, match="power"):
        parse_csv(path)


def test_parse_no_valid_rows(tmp_path):
    path = _write(tmp_path, [HEADER, "x,y,z,1,1,1,1,1"])
    with pytest.raises(EmptyDataError):
        parse_csv(path)


def test_parse_schema_mapping(tmp_path):
    names = {c: c.upper() for c in COLUMNS}
    path = _write(tmp_path, [",".join(names[c] for c in COLUMNS), _row(0), _row(600)])
    assert len(parse_csv(path, schema=names)) == 2


def test_negative_power_kept(tmp_path):
    path = _write(tmp_path, [HEADER, _row(0, p=-3.5), _row(600)])
    assert parse_csv(path)["power"][0] == -3.5


def test_csv_round_trip(tmp_path):
    s = make_series(20)
    write_csv(s, tmp_path / "a.csv")
    back = parse_csv(tmp_path / "a.csv")
    for c in COLUMNS:
        np.testing.assert_array_equal(back[c], s[c])


def test_gaps_are_recorded():
    s = make_series(20, drop=[5, 6])
    assert s.gaps.tolist() == [4]


@pytest.mark.parametrize("z, expected", [(0.0, 0.0), (10.0, 1.0), (5.0, 0.5)])
def test_normalize_examples(z, expected):
    assert normalize([z], 0.0, 10.0)[0] == expected


def test_normalize_degenerate():
    with pytest.raises(DegenerateFeatureError):
        normalize([1.0], 2.0, 2.0)
    with pytest.raises(DegenerateFeatureError):
        NormStats.fit({"power": np.ones(5)})


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=30), finite, st.floats(1e-3, 1e6))
def test_normalize_round_trip(values, lo, width):
    hi = lo + width
    v = np.array(values)
    back = inverse_normalize(normalize(v, lo, hi), lo, hi)
    scale = np.maximum(np.abs(v), max(abs(lo), abs(hi)))
    assert np.all(np.abs(back - v) <= 1e-12 * scale + 1e-300)


@pytest.mark.parametrize("h, expected", [(1, 94), (6, 89)])
def test_sample_count(h, expected):
    d = build_supervised(make_series(100), ModelVariant.M3, lookback=6, horizon=h)
    assert len(d) == expected
    assert d.inputs.shape == (expected, 6, 2)


def test_split_determinism():
    s = make_series(1000)
    a = build_supervised(s, "M1", seed=7)
    b = build_supervised(s, "M1", seed=7)
    for name in ("train_idx", "val_idx", "test_idx"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.targets.tobytes() == b.targets.tobytes()


@given(st.integers(11, 3000), st.integers(0, 2 ** 31), st.sampled_from(["random",
                                                                         "chronological"]))
def test_split_partition(n, seed, mode):
    tr, va, te = split_indices(n, seed, mode)
    assert len(va) == len(te) == n // 10
    assert len(tr) == n - 2 * (n // 10)
    allidx = np.concatenate([tr, va, te])
    assert sorted(allidx.tolist()) == list(range(n))


def test_window_rule():
    s = make_series(30)
    d = build_supervised(s, ModelVariant.M4, lookback=3, horizon=2)
    st_ = d.norm_stats
    for i in (0, 7, len(d) - 1):
        np.testing.assert_allclose(d.inputs[i, :, 0],
                                   np.clip(st_.normalize("wind_speed", s["wind_speed"][i:i + 3]),
                                           0, 1))
        assert d.target_time[i] == s.timestamp[i + 3 + 2 - 1]


def test_windows_skip_gaps():
    s = make_series(60, drop=[20])
    d = build_supervised(s, "M1", lookback=6, horizon=1)
    # every window's target lies one cadence after contiguous inputs
    for i, t in enumerate(d.target_time):
        k = int(np.searchsorted(s.timestamp, t))
        span = s.timestamp[k - 6:k + 1]
        assert np.all(np.diff(span) == 600.0)
    assert len(d) == (20 - 7 + 1) + (39 - 7 + 1)


def test_values_in_unit_interval_and_train_only_stats():
    s = make_series(300, seed=4)
    d = build_supervised(s, "M4", seed=1)
    assert d.inputs.min() >= 0 and d.inputs.max() <= 1
    assert d.targets.min() >= 0 and d.targets.max() <= 1
    # stats come from records covered by training windows only
    cover = np.zeros(len(s), bool)
    for i in d.train_idx:
        cover[i:i + 6] = True
        cover[i + 6] = True
    assert d.norm_stats.z_max["power"] == s["power"][cover].max()


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        build_supervised(make_series(16), "M1", lookback=6, horizon=1)


def test_correlation_examples():
    s = make_series(200)
    s.columns["ambient_temp"] = -s.columns["wind_speed"]
    c = correlation_matrix(s)
    names = list(c.names)
    i, j = names.index("wind_speed"), names.index("ambient_temp")
    assert c.matrix[i, i] == 1.0
    assert c.matrix[i, j] == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(c.matrix, c.matrix.T)
    assert np.nanmax(np.abs(c.matrix)) <= 1.0


def test_correlation_flags_constant_feature():
    s = make_series(50)
    s.columns["nacelle_temp"] = np.full(50, 3.0)
    c = correlation_matrix(s)
    assert c.undefined == ["nacelle_temp"]
    k = list(c.names).index("nacelle_temp")
    assert np.isnan(c.matrix[k]).all()
    assert c.to_dict()["matrix"][k][0] is None


def _pearson_two_pass(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def test_correlation_power_vs_speed_oracle():
    s, _ = generate(TurbineSpec(), SynthConfig(n_records=5000, seed=2))
    c = correlation_matrix(s)
    names = list(c.names)
    r = c.matrix[names.index("power"), names.index("wind_speed")]
    oracle = _pearson_two_pass(s["power"].tolist(), s["wind_speed"].tolist())
    assert r == pytest.approx(oracle, abs=1e-10)
    assert r > 0.9
