"""Schema parsing, encoding, joint domains, and CSV round-trips."""
import io
import itertools

import numpy as np
import pytest

from rrkit.dataset import (
    AttributeSchema,
    Dataset,
    JointDomain,
    SchemaError,
    dataset_to_csv,
    discretize,
    load_csv,
    parse_schema_spec,
)

CSV_SAMPLE = """color,size,price,junk
red, small, 3.5, x
blue, large, 12.0, y
red, ?, 25.0, z
blue, small, 7.25, x
"""


def test_attribute_schema_validation():
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("only",))
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("x", "x"))
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("x", "y"), kind="floating")
    attr = AttributeSchema("a", ("x", "y", "z"))
    assert attr.size == 3
    assert attr.index("z") == 2
    with pytest.raises(SchemaError):
        attr.index("w")


def test_dataset_shape_and_immutability():
    schema = [AttributeSchema("a", ("x", "y")), AttributeSchema("b", ("u", "v", "w"))]
    ds = Dataset(schema, [[0, 2], [1, 0]])
    assert (ds.n, ds.m) == (2, 2)
    assert ds.sizes == (2, 3)
    assert ds.names == ("a", "b")
    assert ds.decode_row(ds.records[0]) == ("x", "w")
    with pytest.raises(ValueError):
        ds.records[0, 0] = 1
    with pytest.raises(SchemaError):
        Dataset(schema, [[0, 3]])  # code 3 outside size-3 domain
    with pytest.raises(SchemaError):
        Dataset(schema, [[0], [1]])  # wrong column count


def test_joint_domain_known_code():
    dom = JointDomain((2, 3))
    assert dom.size == 6
    assert dom.encode((1, 2)) == 5  # row-major: 1*3 + 2
    assert list(dom.decode(5)) == [1, 2]


def test_joint_domain_exhaustive_roundtrip():
    sizes = (3, 2, 4)
    dom = JointDomain(sizes)
    tuples = np.array(list(itertools.product(*map(range, sizes))), dtype=np.int64)
    codes = dom.encode(tuples)
    assert sorted(codes.tolist()) == list(range(dom.size))
    back = dom.decode(codes)
    assert (back == tuples).all()


def test_joint_domain_rejects_out_of_range():
    dom = JointDomain((2, 3))
    with pytest.raises(SchemaError):
        dom.encode((2, 0))
    with pytest.raises(SchemaError):
        dom.decode(6)
    with pytest.raises(SchemaError):
        dom.decode(-1)


def test_discretize_half_open_bins():
    bins = [(0.0, 10.0), (10.0, 20.0), (20.0, 30.0)]
    out = discretize([0.0, 9.999, 10.0, 25.0], bins)
    assert out.tolist() == [0, 0, 1, 2]
    with pytest.raises(SchemaError):
        discretize([30.0], bins)  # upper edge is exclusive
    with pytest.raises(SchemaError):
        discretize([-0.1], bins)
    with pytest.raises(SchemaError):
        discretize([5.0], [(0.0, 10.0), (5.0, 20.0)])  # overlap


def test_parse_schema_spec():
    spec = parse_schema_spec(
        """
        # comment line
        color = nominal
        size = ordinal
        price = bins 0, 10, 20, 30
        junk = drop
        .missing = ?, N/A
        """
    )
    assert spec.retained == ["color", "size", "price"]
    assert spec.rules["price"].edges == (0.0, 10.0, 20.0, 30.0)
    assert spec.missing == ("?", "N/A")
    with pytest.raises(SchemaError):
        parse_schema_spec("color = nominal\ncolor = ordinal\n")
    with pytest.raises(SchemaError):
        parse_schema_spec("color = fancy\n")
    with pytest.raises(SchemaError):
        parse_schema_spec("x = drop\n")  # retains nothing


def test_load_csv_keeps_missing_token_as_category_by_default():
    spec = parse_schema_spec("color = nominal\nsize = nominal\n")
    ds, report = load_csv(io.StringIO(CSV_SAMPLE), spec)
    assert ds.n == 4
    assert report.rows_dropped_missing == 0
    # '?' is just another category label when no .missing directive is given
    assert "?" in ds.schema[1].categories


def test_load_csv_missing_directive_drops_rows():
    spec = parse_schema_spec("color = nominal\nsize = nominal\n.missing = ?\n")
    ds, report = load_csv(io.StringIO(CSV_SAMPLE), spec)
    assert ds.n == 3
    assert report.rows_read == 4
    assert report.rows_dropped_missing == 1
    assert "?" not in ds.schema[1].categories


def test_load_csv_bins_and_repeat():
    spec = parse_schema_spec("color = nominal\nprice = bins 0,10,20,30\n")
    ds, report = load_csv(io.StringIO(CSV_SAMPLE), spec, repeat=3)
    assert ds.n == 12
    assert report.repeat == 3
    assert ds.schema[1].kind == "ordinal"
    # prices 3.5, 12.0, 25.0, 7.25 -> bins 0, 1, 2, 0, tiled three times
    assert ds.column(1).tolist() == [0, 1, 2, 0] * 3
    # render sanity: the report mentions the effective count
    assert "effective records: 12" in report.render()


def test_csv_roundtrip_with_weights_and_manifest():
    schema = [AttributeSchema("a", ("x", "y")), AttributeSchema("b", ("u", "v"))]
    ds = Dataset(schema, [[0, 1], [1, 0], [1, 1]])
    text = dataset_to_csv(ds, manifest="run.manifest.json", weights=[0.25, 0.5, 0.25])
    assert text.startswith("# manifest: run.manifest.json\n")
    spec = parse_schema_spec("a = nominal\nb = nominal\n")
    back, _ = load_csv(io.StringIO(text), spec)
    assert (back.records == ds.records).all()


def test_json_roundtrip_and_checksum_tamper_detection():
    schema = [AttributeSchema("a", ("x", "y"))]
    ds = Dataset(schema, [[0], [1], [1]])
    text = ds.to_json()
    back = Dataset.from_json(text)
    assert back.checksum() == ds.checksum()
    assert (back.records == ds.records).all()
    tampered = text.replace("[1]", "[0]", 1)
    with pytest.raises(SchemaError):
        Dataset.from_json(tampered)


def test_adult_ingestion_shape(adult):
    assert adult.m == 8
    assert adult.n == 32561
    assert adult.sizes == (9, 16, 7, 15, 6, 5, 2, 2)
    # the unknown marker stays in the domain as its own category
    assert "?" in adult.schema[0].categories
