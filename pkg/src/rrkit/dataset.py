"""Categorical datasets: schemas, integer encoding, CSV ingestion, joint domains.

Every attribute is a finite ordered list of category labels; records are stored
as integer category indices. Ordinal attributes carry rank information (their
category order is meaningful), nominal ones do not. Numeric columns enter only
through explicit binning, which produces an ordinal attribute.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NOMINAL = "nominal"
ORDINAL = "ordinal"
KINDS = (NOMINAL, ORDINAL)


class SchemaError(ValueError):
    """A schema spec, category list, or encoded value is invalid."""


@dataclass(frozen=True)
class AttributeSchema:
    """One categorical attribute: a name, its category labels, and its kind.

    The position of a label in ``categories`` is its integer code. For ordinal
    attributes the order of ``categories`` is the rank order.
    """

    name: str
    categories: tuple[str, ...]
    kind: str = NOMINAL

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown attribute kind {self.kind!r} for {self.name!r}")
        if len(self.categories) < 2:
            raise SchemaError(f"attribute {self.name!r} needs at least 2 categories")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"attribute {self.name!r} has duplicate categories")

    @property
    def size(self) -> int:
        return len(self.categories)

    def index(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise SchemaError(f"{label!r} is not a category of {self.name!r}") from None


class Dataset:
    """An immutable table of category-coded records.

    Args:
        schema: one AttributeSchema per column.
        records: array-like of shape (n, m) holding category indices.
    """

    def __init__(self, schema: Sequence[AttributeSchema], records):
        self.schema = list(schema)
        arr = np.asarray(records, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != len(self.schema):
            raise SchemaError(
                f"records shape {arr.shape} does not match {len(self.schema)} attributes"
            )
        for j, attr in enumerate(self.schema):
            col = arr[:, j]
            if col.size and (col.min() < 0 or col.max() >= attr.size):
                raise SchemaError(f"column {attr.name!r} holds codes outside [0, {attr.size})")
        arr.flags.writeable = False
        self.records = arr

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def m(self) -> int:
        return len(self.schema)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.schema)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    def column(self, j: int) -> np.ndarray:
        return self.records[:, j]

    def repeat(self, times: int) -> "Dataset":
        """Concatenate ``times`` copies of the records (same schema)."""
        if times < 1:
            raise SchemaError("repeat count must be >= 1")
        if times == 1:
            return self
        return Dataset(self.schema, np.tile(self.records, (times, 1)))

    def decode_row(self, row) -> tuple[str, ...]:
        return tuple(self.schema[j].categories[int(v)] for j, v in enumerate(row))

    def checksum(self) -> str:
        """sha256 over a canonical text serialization of schema plus records."""
        h = hashlib.sha256()
        h.update(json.dumps(self._schema_payload(), sort_keys=True).encode())
        h.update(self.records.tobytes())
        return h.hexdigest()

    def _schema_payload(self):
        return [
            {"name": a.name, "kind": a.kind, "categories": list(a.categories)}
            for a in self.schema
        ]

    def to_json(self, manifest: str | None = None) -> str:
        payload = {
            "schema": self._schema_payload(),
            "records": self.records.tolist(),
            "checksum": self.checksum(),
        }
        if manifest is not None:
            payload["manifest"] = manifest
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        payload = json.loads(text)
        schema = [
            AttributeSchema(s["name"], tuple(s["categories"]), s["kind"])
            for s in payload["schema"]
        ]
        ds = cls(schema, payload["records"])
        stored = payload.get("checksum")
        if stored is not None and stored != ds.checksum():
            raise SchemaError("dataset checksum mismatch; file corrupted or edited")
        return ds


class JointDomain:
    """Mixed-radix coding of an ordered attribute subset into one flat domain.

    Codes are row-major: the last attribute varies fastest, so for sizes
    (2, 3) the tuple (1, 2) maps to 1*3 + 2 = 5.
    """

    def __init__(self, sizes: Sequence[int], attributes: Sequence[int] | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if any(s < 1 for s in self.sizes) or not self.sizes:
            raise SchemaError("joint domain needs positive attribute sizes")
        self.attributes = tuple(attributes) if attributes is not None else tuple(range(len(sizes)))
        if len(self.attributes) != len(self.sizes):
            raise SchemaError("attribute list and size list disagree")
        size = 1
        for s in self.sizes:
            size *= s
        self.size = size

    def encode(self, values) -> np.ndarray | int:
        """Map value tuples (…, m) to flat codes; scalar in, scalar out."""
        arr = np.asarray(values, dtype=np.int64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.shape[-1] != len(self.sizes):
            raise SchemaError(f"expected {len(self.sizes)} components, got {arr.shape[-1]}")
        try:
            codes = np.ravel_multi_index(tuple(arr.T), self.sizes)
        except ValueError as exc:
            raise SchemaError(f"value outside joint domain: {exc}") from None
        codes = codes.astype(np.int64)
        return int(codes[0]) if single else codes

    def decode(self, codes) -> np.ndarray:
        """Inverse of encode; out-of-range codes are an error, never wrapped."""
        arr = np.atleast_1d(np.asarray(codes, dtype=np.int64))
        if arr.size and (arr.min() < 0 or arr.max() >= self.size):
            raise SchemaError(f"code outside joint domain of size {self.size}")
        parts = np.unravel_index(arr, self.sizes)
        out = np.stack(parts, axis=-1).astype(np.int64)
        return out[0] if np.isscalar(codes) or np.asarray(codes).ndim == 0 else out


def discretize(values, bins: Sequence[tuple[float, float]]) -> np.ndarray:
    """Map numeric values onto ordered half-open intervals [lo, hi).

    Intervals must be ordered and non-overlapping; a value falling outside all
    of them raises SchemaError rather than being clamped.
    """
    lows = np.asarray([b[0] for b in bins], dtype=float)
    highs = np.asarray([b[1] for b in bins], dtype=float)
    if len(bins) < 1:
        raise SchemaError("need at least one bin")
    if not (highs > lows).all():
        raise SchemaError("each bin needs hi > lo")
    if (lows[1:] < highs[:-1]).any():
        raise SchemaError("bins must be ordered and non-overlapping")
    v = np.asarray(values, dtype=float)
    idx = np.searchsorted(lows, v, side="right") - 1
    bad = (idx < 0) | (v >= highs[np.clip(idx, 0, len(bins) - 1)])
    if bad.any():
        culprit = v[np.nonzero(bad)[0][0]]
        raise SchemaError(f"value {culprit} falls outside every bin")
    return idx.astype(np.int64)


@dataclass
class ColumnRule:
    """Ingestion rule for one CSV column."""

    kind: str  # nominal | ordinal | bins | drop
    edges: tuple[float, ...] | None = None


@dataclass
class SchemaSpec:
    """Parsed schema spec: per-column rules plus global directives."""

    rules: dict[str, ColumnRule] = field(default_factory=dict)
    missing: tuple[str, ...] = ()

    @property
    def retained(self) -> list[str]:
        return [name for name, rule in self.rules.items() if rule.kind != "drop"]


def parse_schema_spec(text: str) -> SchemaSpec:
    """Parse the key/value schema-spec format.

    One ``column-name = rule`` line per column, where rule is ``nominal``,
    ``ordinal``, ``drop``, or ``bins e0,e1,...,ek`` (edges of half-open
    intervals). Directive lines start with a dot: ``.missing = ?``.
    Full-line ``#`` comments and blank lines are ignored. Columns not listed
    are dropped.
    """
    spec = SchemaSpec()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"schema spec line {lineno}: expected 'name = rule'")
        name, _, value = line.partition("=")
        name = name.strip()
        value = value.strip()
        if name.startswith("."):
            if name == ".missing":
                spec.missing = tuple(tok.strip() for tok in value.split(",") if tok.strip())
            else:
                raise SchemaError(f"schema spec line {lineno}: unknown directive {name!r}")
            continue
        if name in spec.rules:
            raise SchemaError(f"schema spec line {lineno}: column {name!r} listed twice")
        if value in (NOMINAL, ORDINAL, "drop"):
            spec.rules[name] = ColumnRule(value)
        elif value.startswith("bins"):
            edges = tuple(float(tok) for tok in value[len("bins"):].replace(",", " ").split())
            if len(edges) < 3:
                raise SchemaError(f"schema spec line {lineno}: bins need at least 3 edges")
            spec.rules[name] = ColumnRule("bins", edges)
        else:
            raise SchemaError(f"schema spec line {lineno}: unknown rule {value!r}")
    if not spec.retained:
        raise SchemaError("schema spec retains no columns")
    return spec


@dataclass
class IngestReport:
    """What ingestion actually did, including the effective record count."""

    source: str
    rows_read: int
    rows_dropped_missing: int
    repeat: int
    n: int
    columns: list[tuple[str, str, int]]  # (name, kind, category count)

    def render(self) -> str:
        lines = [
            f"source: {self.source}",
            f"rows read: {self.rows_read}",
            f"rows dropped (missing values): {self.rows_dropped_missing}",
            f"repeat factor: {self.repeat}",
            f"effective records: {self.n}",
            "attributes:",
        ]
        for name, kind, size in self.columns:
            lines.append(f"  {name}: {kind}, {size} categories")
        joint = 1
        for _, _, size in self.columns:
            joint *= size
        lines.append(f"joint domain size: {joint}")
        return "\n".join(lines)


def _numeric_sortable(labels: Iterable[str]) -> bool:
    try:
        for lab in labels:
            float(lab)
    except ValueError:
        return False
    return True


def load_csv(path_or_buffer, spec: SchemaSpec, repeat: int = 1) -> tuple[Dataset, IngestReport]:
    """Ingest a header CSV under a schema spec.

    Returns the encoded dataset together with an IngestReport disclosing the
    effective record count (rows dropped, repeat factor applied). Lines whose
    first character is ``#`` are skipped so our own CSV artifacts round-trip.
    """
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, "r", encoding="utf-8", newline="") as fh:
            return load_csv(fh, spec, repeat=repeat)
    source = getattr(path_or_buffer, "name", "<stream>")
    lines = (ln for ln in path_or_buffer if not ln.startswith("#"))
    reader = csv.reader(lines, skipinitialspace=True)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty CSV") from None
    positions = {}
    for name in spec.retained:
        if name not in header:
            raise SchemaError(f"column {name!r} not in CSV header")
        positions[name] = header.index(name)

    raw_columns: dict[str, list[str]] = {name: [] for name in spec.retained}
    rows_read = 0
    dropped = 0
    for row in reader:
        if not row:
            continue
        rows_read += 1
        cells = {name: row[positions[name]].strip() for name in spec.retained}
        if spec.missing and any(cells[name] in spec.missing for name in spec.retained):
            dropped += 1
            continue
        for name in spec.retained:
            raw_columns[name].append(cells[name])

    n = rows_read - dropped
    if n == 0:
        raise SchemaError("no records left after ingestion")

    schema: list[AttributeSchema] = []
    encoded = np.empty((n, len(spec.retained)), dtype=np.int64)
    for j, name in enumerate(spec.retained):
        rule = spec.rules[name]
        col = raw_columns[name]
        if rule.kind == "bins":
            values = np.asarray([float(v) for v in col])
            bins = [(rule.edges[i], rule.edges[i + 1]) for i in range(len(rule.edges) - 1)]
            encoded[:, j] = discretize(values, bins)
            labels = tuple(f"[{lo:g},{hi:g})" for lo, hi in bins)
            schema.append(AttributeSchema(name, labels, ORDINAL))
        else:
            uniq = sorted(set(col), key=float if rule.kind == ORDINAL and _numeric_sortable(set(col)) else str)
            attr = AttributeSchema(name, tuple(uniq), rule.kind)
            lookup = {lab: i for i, lab in enumerate(uniq)}
            encoded[:, j] = [lookup[v] for v in col]
            schema.append(attr)

    ds = Dataset(schema, encoded)
    if repeat > 1:
        ds = ds.repeat(repeat)
    report = IngestReport(
        source=str(source),
        rows_read=rows_read,
        rows_dropped_missing=dropped,
        repeat=repeat,
        n=ds.n,
        columns=[(a.name, a.kind, a.size) for a in schema],
    )
    return ds, report


def dataset_to_csv(ds: Dataset, manifest: str | None = None, weights=None) -> str:
    """Render records back to labeled CSV (optionally with a weight column)."""
    buf = io.StringIO()
    if manifest is not None:
        buf.write(f"# manifest: {manifest}\n")
    writer = csv.writer(buf, lineterminator="\n")
    head = list(ds.names) + (["weight"] if weights is not None else [])
    writer.writerow(head)
    for i in range(ds.n):
        row = list(ds.decode_row(ds.records[i]))
        if weights is not None:
            row.append(repr(float(weights[i])))
        writer.writerow(row)
    return buf.getvalue()
