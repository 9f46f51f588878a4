import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segan.data import (
    ColumnSchema,
    Dataset,
    decode,
    encode,
    holdout_known,
    inject_mcar,
    load_csv,
    mask_labels,
    write_csv,
)
from segan.errors import ConfigError, DatasetTooSmallError, ParseError, SchemaError


def _write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_single_empty_cell_gives_single_zero(tmp_path):
    table, schema = load_csv(_write(tmp_path, "a,b\n1,2\n3,\n5,6\n"))
    ds = encode(table, schema)
    assert int((ds.mask == 0).sum()) == 1
    assert ds.mask[1, 1] == 0 and np.isnan(ds.values[1, 1])


def test_missing_tokens(tmp_path):
    table, _ = load_csv(_write(tmp_path, "a,b\nNA,1\nNaN,2\n 3 ,\n"))
    assert [r[0] for r in table.rows] == [None, None, " 3 "]
    assert table.rows[2][1] is None


def test_two_label_values_give_two_classes(tmp_path):
    table, schema = load_csv(_write(tmp_path, "x,y\n1,no\n2,yes\n3,no\n"), "y")
    ds = encode(table, schema)
    assert ds.n_classes == 2 and schema.label_classes == ["no", "yes"]
    np.testing.assert_array_equal(ds.labels, [0, 1, 0])
    assert ds.d == 1


def test_numeric_labels_sort_numerically(tmp_path):
    _, schema = load_csv(_write(tmp_path, "x,y\n1,10\n2,9\n3,\n"), "y")
    assert schema.label_classes == ["9", "10"]


def test_min_max_recorded_and_scaled(tmp_path):
    table, schema = load_csv(_write(tmp_path, "a\n2\n4\n6\n"))
    assert schema.minimums[0] == 2 and schema.maximums[0] == 6
    np.testing.assert_array_equal(encode(table, schema).values, [[0.0, 0.5, 1.0]])


def test_constant_column_encodes_to_zero(tmp_path):
    table, schema = load_csv(_write(tmp_path, "a\n5\n5\n5\n"))
    np.testing.assert_array_equal(encode(table, schema).values, [[0.0, 0.0, 0.0]])


def test_categorical_one_hot(tmp_path):
    table, schema = load_csv(_write(tmp_path, "c\na\nb\na\n"))
    assert schema.kinds == ["categorical"] and schema.categories[0] == ["a", "b"]
    np.testing.assert_array_equal(encode(table, schema).values, [[1, 0, 1], [0, 1, 0]])


def test_missing_category_blanks_block(tmp_path):
    table, schema = load_csv(_write(tmp_path, "c,x\na,1\n,2\nb,3\n"))
    ds = encode(table, schema)
    np.testing.assert_array_equal(ds.mask[:, 1], [0, 0, 1])
    np.testing.assert_array_equal(ds.groups, [0, 0, 1])


def test_decode_examples():
    schema = ColumnSchema(["numeric", "categorical"], {1: ["x", "y", "z"]}, {0: 2.0}, {0: 6.0},
                          ["n", "c"])
    rows = decode(np.array([[0.5], [0.2], [0.7], [0.1]]), schema)
    assert rows == [[4.0, "y"]]


def test_round_trip_5x3(tmp_path):
    text = "n,c,m\n1.5,red,10\n2.25,blue,20\n-3,red,30\n0,green,40\n8,blue,50\n"
    path = _write(tmp_path, text)
    table, schema = load_csv(path)
    ds = encode(table, schema)
    rows = decode(ds.values, schema)
    for raw, back in zip(table.rows, rows):
        assert back[1] == raw[1]
        assert back[0] == pytest.approx(float(raw[0]), abs=1e-12)
        assert back[2] == pytest.approx(float(raw[2]), abs=1e-12)
    out = tmp_path / "out.csv"
    write_csv(out, table, rows)
    assert out.read_text() == text


def test_write_csv_fills_only_missing(tmp_path):
    table, schema = load_csv(_write(tmp_path, "a,y,b\n1,p,\n,q,4\n3,,5\n"), "y")
    ds = encode(table, schema)
    filled = np.where(ds.mask == 1, ds.values, 0.5)
    out = tmp_path / "out.csv"
    write_csv(out, table, decode(filled, schema), ["p", "q", "p"])
    assert out.read_text() == "a,y,b\n1,p,4.5\n2,q,4\n3,p,5\n"


def test_ragged_row_reports_line(tmp_path):
    with pytest.raises(ParseError, match="line 3"):
        load_csv(_write(tmp_path, "a,b\n1,2\n3\n"))


def test_empty_file(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, ""))


def test_unknown_label_column(tmp_path):
    with pytest.raises(ConfigError):
        load_csv(_write(tmp_path, "a,b\n1,2\n"), "y")


def test_unseen_category_rejected(tmp_path):
    _, schema = load_csv(_write(tmp_path, "c\na\nb\n"))
    table, _ = load_csv(_write(tmp_path, "c\na\nz\n", "other.csv"))
    with pytest.raises(SchemaError):
        encode(table, schema)


def test_schema_dict_round_trip(tmp_path):
    _, schema = load_csv(_write(tmp_path, "n,c,y\n1,a,0\n2,b,1\n"), "y")
    again = ColumnSchema.from_dict(schema.to_dict())
    assert again == schema and again.fingerprint() == schema.fingerprint()


# -- missingness ---------------------------------------------------------------

def _full(d, n, rng):
    v = rng.random((d, n))
    return Dataset(v, np.ones((d, n)), np.full(n, -1))


def test_mcar_tiny_rate_keeps_mask():
    ds = _full(10, 100, np.random.default_rng(0))
    out = inject_mcar(ds, 1e-12, np.random.default_rng(0))
    np.testing.assert_array_equal(out.mask, ds.mask)


def test_mcar_deleted_fraction():
    ds = _full(100, 100, np.random.default_rng(0))
    out = inject_mcar(ds, 0.5, np.random.default_rng(1))
    assert 0.48 <= 1 - out.mask.mean() <= 0.52
    assert np.isnan(out.values[out.mask == 0]).all()


def test_mcar_independent_of_values():
    ds = _full(100, 100, np.random.default_rng(0))
    out = inject_mcar(ds, 0.3, np.random.default_rng(2))
    high = ds.values > np.median(ds.values, axis=1, keepdims=True)
    rate_high = 1 - out.mask[high].mean()
    rate_low = 1 - out.mask[~high].mean()
    assert abs(rate_high - rate_low) < 0.02


def test_mcar_never_revives_and_respects_groups():
    rng = np.random.default_rng(3)
    ds = _full(5, 400, rng)
    ds.mask[0, :50] = 0
    ds.groups = np.array([0, 0, 1, 1, 1])
    out = inject_mcar(ds, 0.4, rng, ds.groups)
    assert (out.mask <= ds.mask).all()
    np.testing.assert_array_equal(out.mask[2], out.mask[3])
    np.testing.assert_array_equal(out.mask[3], out.mask[4])


@pytest.mark.parametrize("rate", [0.0, 1.0, -0.2])
def test_mcar_rate_bounds(rate):
    with pytest.raises(ConfigError):
        inject_mcar(_full(2, 2, np.random.default_rng(0)), rate, np.random.default_rng(0))


def test_holdout_size_and_partition():
    mask = np.ones((10, 100))
    mask[0, :] = 0  # 900 observed
    train, hold = holdout_known(mask, 0.2, np.random.default_rng(0))
    assert hold.dtype == bool and hold.sum() == 180
    assert not (hold & (train == 1)).any()
    np.testing.assert_array_equal((train == 1) | hold, mask == 1)


def test_holdout_1000_entries():
    _, hold = holdout_known(np.ones((10, 100)), 0.2, np.random.default_rng(0))
    assert hold.sum() == 200


def test_holdout_depends_on_seed():
    mask = np.ones((10, 100))
    a = holdout_known(mask, 0.2, np.random.default_rng(0))[1]
    b = holdout_known(mask, 0.2, np.random.default_rng(1))[1]
    assert (a != b).any()


def test_holdout_empty_mask():
    with pytest.raises(DatasetTooSmallError):
        holdout_known(np.zeros((2, 2)), 0.2, np.random.default_rng(0))


def test_label_masking():
    labels = np.arange(1000) % 3
    np.testing.assert_array_equal(mask_labels(labels, 1.0, np.random.default_rng(0)), labels)
    kept = mask_labels(labels, 0.5, np.random.default_rng(0))
    assert (kept >= 0).sum() == 500
    np.testing.assert_array_equal(kept[kept >= 0], labels[kept >= 0])
    with pytest.raises(ConfigError):
        mask_labels(labels, 0.0, np.random.default_rng(0))


# -- properties ---------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=30))
def test_numeric_round_trip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "v.csv"
    path.write_text("v\n" + "".join(f"{v!r}\n" for v in values))
    table, schema = load_csv(path)
    enc = encode(table, schema).values
    assert ((enc >= 0) & (enc <= 1)).all()
    back = [r[0] for r in decode(enc, schema)]
    span = max(values) - min(values)
    np.testing.assert_allclose(back, values, atol=1e-9 * max(span, 1.0) if span else 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 40), st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
def test_holdout_partition_property(d, n, fraction, seed):
    rng = np.random.default_rng(seed)
    mask = (rng.random((d, n)) < 0.7).astype(float)
    if not mask.any():
        mask[0, 0] = 1.0
    train, hold = holdout_known(mask, fraction, rng)
    assert not (hold & (train == 1)).any()
    np.testing.assert_array_equal((train == 1) | hold, mask == 1)
    assert hold.sum() == int(round(fraction * mask.sum()))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 40), st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
def test_mcar_only_removes_property(d, n, rate, seed):
    rng = np.random.default_rng(seed)
    ds = _full(d, n, rng)
    ds.mask = (rng.random((d, n)) < 0.8).astype(float)
    out = inject_mcar(ds, rate, rng)
    assert (out.mask <= ds.mask).all()
    np.testing.assert_array_equal(out.values[out.mask == 1], ds.values[out.mask == 1])
