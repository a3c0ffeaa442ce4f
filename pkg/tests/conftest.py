import numpy as np
import pytest

from aqtile.rawstore import DatasetDescriptor


def write_csv(path, rows, header="x,y,a2,a3", newline="\n"):
    text = ""
    if header:
        text += header + newline
    for row in rows:
        text += ",".join(str(v) for v in row) + newline
    path.write_bytes(text.encode())
    return path


def descriptor_for(path, n_attrs=4, has_header=True, delimiter=","):
    names = ["x", "y"] + [f"a{i}" for i in range(2, n_attrs)]
    return DatasetDescriptor(
        file_path=str(path),
        attributes=tuple((n, "numeric") for n in names),
        axis_x=0,
        axis_y=1,
        delimiter=delimiter,
        has_header=has_header,
    )


@pytest.fixture
def small_csv(tmp_path):
    """Deterministic 200-row file with 4 numeric columns."""
    rng = np.random.default_rng(42)
    rows = rng.uniform(0, 100, size=(200, 4)).round(4)
    path = write_csv(tmp_path / "small.csv", rows.tolist())
    return path, descriptor_for(path), rows
