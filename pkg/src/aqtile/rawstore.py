"""Raw CSV access: sequential offset-recording scans and batched random reads.

A dataset is a plain numeric CSV described by a :class:`DatasetDescriptor`.
Scanning parses the file once and reports the byte offset of every data row;
those offsets are what the tile index stores, and `read_objects` re-parses
rows at given offsets later. An I/O operation is one object whose attribute
values are read back from the file, regardless of how many columns are read.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

_BOM = b"\xef\xbb\xbf"
_CHUNK_BYTES = 32 << 20


class RawStoreError(Exception):
    """Base error for raw file access."""


class MalformedRowError(RawStoreError):
    """A row failed to parse and strict mode is active."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class RowParseError(RawStoreError):
    """A row read back by offset failed to parse (bad offset or dirty data)."""

    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


@dataclass(frozen=True)
class DatasetDescriptor:
    """Schema and axis designation for one raw CSV file.

    `attributes` is the ordered column list as (name, kind) with kind either
    "numeric" or "other"; axis attributes must be numeric and distinct.
    """

    file_path: str
    attributes: tuple[tuple[str, str], ...]
    axis_x: int
    axis_y: int
    delimiter: str = ","
    has_header: bool = True

    def __post_init__(self):
        names = [n for n, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if self.axis_x == self.axis_y:
            raise ValueError("axis_x and axis_y must differ")
        for ax in (self.axis_x, self.axis_y):
            if not 0 <= ax < len(self.attributes):
                raise ValueError(f"axis index {ax} out of range")
            if self.attributes[ax][1] != "numeric":
                raise ValueError(f"axis attribute {ax} must be numeric")
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def numeric_indices(self) -> set[int]:
        return {i for i, (_, kind) in enumerate(self.attributes) if kind == "numeric"}

    def validate_numeric(self, indices: Iterable[int]) -> None:
        numeric = self.numeric_indices()
        for i in indices:
            if i not in numeric:
                raise ValueError(f"attribute {i} is not a numeric column")

    def to_json(self) -> dict:
        return {
            "file_path": self.file_path,
            "attributes": [{"name": n, "kind": k} for n, k in self.attributes],
            "axis_x": self.axis_x,
            "axis_y": self.axis_y,
            "delimiter": self.delimiter,
            "has_header": self.has_header,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetDescriptor":
        return cls(
            file_path=doc["file_path"],
            attributes=tuple(
                (a["name"], a.get("kind", "numeric")) for a in doc["attributes"]
            ),
            axis_x=doc["axis_x"],
            axis_y=doc["axis_y"],
            delimiter=doc.get("delimiter", ","),
            has_header=doc.get("has_header", True),
        )


@dataclass
class ObjectRecord:
    """One parsed data row: its byte offset, axis values, and requested values."""

    offset: int
    axis_x_value: float
    axis_y_value: float
    values: np.ndarray


@dataclass
class IoCounter:
    """Counts objects whose attribute values were read from the file."""

    reads: int = 0

    def add(self, n: int) -> None:
        self.reads += n

    def reset(self) -> None:
        self.reads = 0


@dataclass
class ScanChunk:
    """A parsed stretch of rows: row-start offsets plus selected columns."""

    offsets: np.ndarray          # int64, absolute byte position of each row start
    columns: tuple[int, ...]     # attribute indices present in `values`
    values: np.ndarray           # float64, shape (n_rows, len(columns))
    first_line_no: int           # 1-based file line number of the first row
    skipped: list = field(default_factory=list)  # (line_no, reason) pairs


def _iter_raw_rows(path: str, chunk_bytes: int = _CHUNK_BYTES):
    """Yield (chunk_start_offset, chunk_bytes_without_partial_tail) pieces.

    Each yielded chunk ends on a row boundary; a trailing line without a
    newline is yielded last.
    """
    with open(path, "rb") as fh:
        start = 0
        carry = b""
        while True:
            block = fh.read(chunk_bytes)
            if not block:
                if carry:
                    yield start, carry
                return
            data = carry + block
            cut = data.rfind(b"\n")
            if cut < 0:
                carry = data
                continue
            yield start, data[: cut + 1]
            carry = data[cut + 1 :]
            start += cut + 1


def _parse_rows_lenient(
    raw: bytes,
    row_starts: np.ndarray,
    base_offset: int,
    first_line_no: int,
    dataset: DatasetDescriptor,
    cols: tuple[int, ...],
    strict: bool,
):
    """Row-at-a-time parse used when the vectorized path rejects a chunk."""
    delim = dataset.delimiter.encode()
    n_attr = dataset.n_attributes
    good_offsets: list[int] = []
    good_rows: list[list[float]] = []
    skipped: list[tuple[int, str]] = []
    boundaries = list(row_starts - base_offset) + [len(raw)]
    for i in range(len(row_starts)):
        line_no = first_line_no + i
        row = raw[boundaries[i] : boundaries[i + 1]].rstrip(b"\r\n")
        if not row:
            skipped.append((line_no, "empty row"))
            continue
        if b'"' in row:
            # quoted fields are out of scope; read_objects could not re-parse
            # them at their offsets, so the row is rejected in both modes
            if strict:
                raise MalformedRowError(line_no, "quoted field not supported")
            skipped.append((line_no, "quoted field not supported"))
            continue
        fields = row.split(delim)
        if len(fields) != n_attr:
            reason = f"expected {n_attr} fields, found {len(fields)}"
            if strict:
                raise MalformedRowError(line_no, reason)
            skipped.append((line_no, reason))
            continue
        try:
            vals = [float(fields[c]) for c in cols]
        except ValueError:
            reason = "non-numeric value in numeric column"
            if strict:
                raise MalformedRowError(line_no, reason)
            skipped.append((line_no, reason))
            continue
        if not all(np.isfinite(vals)):
            reason = "non-finite value in numeric column"
            if strict:
                raise MalformedRowError(line_no, reason)
            skipped.append((line_no, reason))
            continue
        good_offsets.append(base_offset + boundaries[i])
        good_rows.append(vals)
    offsets = np.asarray(good_offsets, dtype=np.int64)
    values = (
        np.asarray(good_rows, dtype=np.float64)
        if good_rows
        else np.empty((0, len(cols)))
    )
    return offsets, values, skipped


def iter_scan_chunks(
    dataset: DatasetDescriptor,
    wanted: Iterable[int],
    strict: bool = False,
    chunk_bytes: int = _CHUNK_BYTES,
) -> Iterator[ScanChunk]:
    """Stream the file once, yielding parsed chunks with row offsets.

    `wanted` are the attribute indices to materialize; the axis attributes
    are always included. Malformed rows are skipped (logged) unless strict.
    """
    cols = tuple(sorted(set(wanted) | {dataset.axis_x, dataset.axis_y}))
    dataset.validate_numeric(cols)
    path = Path(dataset.file_path)
    if not path.is_file():
        raise FileNotFoundError(dataset.file_path)

    header_pending = dataset.has_header
    bom_pending = True
    line_no = 0
    for chunk_start, raw in _iter_raw_rows(str(path), chunk_bytes):
        if bom_pending:
            bom_pending = False
            if raw.startswith(_BOM):
                raw = raw[len(_BOM) :]
                chunk_start += len(_BOM)
        # row start positions within the chunk
        buf = np.frombuffer(raw, dtype=np.uint8)
        newlines = np.flatnonzero(buf == 0x0A)
        starts = np.concatenate(([0], newlines[:-1] + 1)) if len(newlines) else np.array([0])
        if len(newlines) and newlines[-1] != len(raw) - 1:
            # trailing row without newline (EOF)
            starts = np.concatenate((starts, [newlines[-1] + 1]))
        first_line_no = line_no + 1
        line_no += len(starts)
        if header_pending:
            header_pending = False
            if len(starts) == 1:
                continue
            drop = int(starts[1])
            raw = raw[drop:]
            starts = starts[1:] - drop
            chunk_start += drop
            first_line_no += 1
        if len(raw) == 0 or len(starts) == 0:
            continue
        abs_starts = starts.astype(np.int64) + chunk_start

        chunk = _fast_parse(raw, abs_starts, first_line_no, dataset, cols, strict)
        for ln, reason in chunk.skipped:
            log.warning("skipping malformed row at line %d: %s", ln, reason)
        yield chunk


def _fast_parse(raw, abs_starts, first_line_no, dataset, cols, strict):
    """Vectorized pandas parse; falls back to the lenient row parser."""
    try:
        df = pd.read_csv(
            io.BytesIO(raw),
            header=None,
            usecols=list(cols),
            dtype=np.float64,
            sep=dataset.delimiter,
            na_filter=True,
        )
        values = df.to_numpy()
        if values.shape[0] != len(abs_starts):
            raise ValueError("row count mismatch")
        if b'"' in raw:
            raise ValueError("quote character present")
        finite = np.isfinite(values).all(axis=1)
        if not finite.all():
            raise ValueError("non-finite values present")
        return ScanChunk(abs_starts, cols, values, first_line_no, [])
    except (ValueError, pd.errors.ParserError):
        offsets, values, skipped = _parse_rows_lenient(
            raw, abs_starts, int(abs_starts[0]), first_line_no, dataset, cols, strict
        )
        return ScanChunk(offsets, cols, values, first_line_no, skipped)


def scan(
    dataset: DatasetDescriptor,
    wanted: Iterable[int],
    sink: Callable[[ObjectRecord], None],
    strict: bool = False,
) -> int:
    """Parse the file sequentially, invoking `sink` once per data row.

    Returns the number of records delivered. Offsets point at the first byte
    of each row. The caller accounts for this scan's I/O cost separately.
    """
    wanted = tuple(sorted(set(wanted)))
    count = 0
    for chunk in iter_scan_chunks(dataset, wanted, strict=strict):
        col_pos = {a: i for i, a in enumerate(chunk.columns)}
        ix = col_pos[dataset.axis_x]
        iy = col_pos[dataset.axis_y]
        sel = [col_pos[a] for a in wanted]
        for r in range(len(chunk.offsets)):
            row = chunk.values[r]
            sink(
                ObjectRecord(
                    offset=int(chunk.offsets[r]),
                    axis_x_value=float(row[ix]),
                    axis_y_value=float(row[iy]),
                    values=row[sel],
                )
            )
            count += 1
    return count


def scan_arrays(
    dataset: DatasetDescriptor, wanted: Iterable[int], strict: bool = False
):
    """One-pass bulk scan. Returns (offsets, columns, values, n_skipped)
    where `values` has one column per entry of `columns` (sorted attribute
    indices, axes included)."""
    offsets_parts = []
    values_parts = []
    columns: tuple[int, ...] = ()
    skipped = 0
    for chunk in iter_scan_chunks(dataset, wanted, strict=strict):
        columns = chunk.columns
        offsets_parts.append(chunk.offsets)
        values_parts.append(chunk.values)
        skipped += len(chunk.skipped)
    if not offsets_parts:
        cols = tuple(sorted(set(wanted) | {dataset.axis_x, dataset.axis_y}))
        return np.empty(0, np.int64), cols, np.empty((0, len(cols))), 0
    return (
        np.concatenate(offsets_parts),
        columns,
        np.concatenate(values_parts),
        skipped,
    )


class RawReader:
    """Random access to rows by byte offset, with I/O accounting.

    One reader belongs to one query session; reads within a call happen in
    ascending offset order so the access pattern stays sequential.
    """

    def __init__(self, dataset: DatasetDescriptor, counter: IoCounter | None = None):
        self.dataset = dataset
        self.counter = counter if counter is not None else IoCounter()
        self._fh = open(dataset.file_path, "rb")
        self._delim = dataset.delimiter.encode()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RawReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def read_objects(self, offsets: Sequence[int], wanted: Iterable[int]) -> np.ndarray:
        """Read one row per offset (ascending), returning the wanted columns.

        Returns a (len(offsets), len(wanted)) float64 array with columns in
        sorted(wanted) order. Increments the I/O counter by len(offsets).
        """
        cols = tuple(sorted(set(wanted)))
        self.dataset.validate_numeric(cols)
        n_attr = self.dataset.n_attributes
        out = np.empty((len(offsets), len(cols)))
        prev = -1
        for i, off in enumerate(offsets):
            off = int(off)
            if off < prev:
                raise ValueError("offsets must be sorted ascending")
            prev = off
            self._fh.seek(off)
            row = self._fh.readline().rstrip(b"\r\n")
            fields = row.split(self._delim)
            if len(fields) != n_attr:
                raise RowParseError(off, f"expected {n_attr} fields, found {len(fields)}")
            try:
                for j, c in enumerate(cols):
                    out[i, j] = float(fields[c])
            except ValueError as e:
                raise RowParseError(off, str(e)) from e
        self.counter.add(len(offsets))
        return out


def read_objects(
    dataset: DatasetDescriptor,
    offsets: Sequence[int],
    wanted: Iterable[int],
    counter: IoCounter | None = None,
) -> np.ndarray:
    """One-shot convenience wrapper around :class:`RawReader`."""
    with RawReader(dataset, counter) as reader:
        return reader.read_objects(offsets, wanted)
