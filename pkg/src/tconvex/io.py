"""Point-cloud CSV files and small file helpers.

Clouds are stored one point per row with ``'%.17g'`` formatting, which
round-trips doubles exactly.  An optional header row ``x0,...,x{D-1}`` is
recognised on read.
"""

import hashlib
import io
import os

import numpy as np

FLOAT_FORMAT = "%.17g"


class CloudParseError(ValueError):
    """Malformed cloud CSV; ``row`` is the 1-based line number."""

    def __init__(self, path, row, message):
        self.path = path
        self.row = row
        super().__init__(f"{path}: row {row}: {message}")


def format_cloud(points, header=False):
    """CSV text for an (n, D) array."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("a cloud must be a 2-d array")
    buf = io.StringIO()
    if header:
        buf.write(",".join(f"x{j}" for j in range(x.shape[1])) + "\n")
    if len(x):
        np.savetxt(buf, x, fmt=FLOAT_FORMAT, delimiter=",")
    return buf.getvalue()


def write_cloud(path, points, header=False):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_cloud(points, header))


def parse_cloud(text, path="<cloud>"):
    """Parse CSV text into an (n, D) float array.

    Blank lines are skipped.  Every data row must have the same number of
    finite numeric fields.
    """
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if not rows and width is None and fields[0].lower() == "x0":
            expected = [f"x{j}" for j in range(len(fields))]
            if [f.lower() for f in fields] != expected:
                raise CloudParseError(path, lineno, "header must read x0,x1,...")
            width = len(fields)
            continue
        try:
            values = [float(f) for f in fields]
        except ValueError:
            bad = next(f for f in fields if not _is_float(f))
            raise CloudParseError(path, lineno, f"not a number: {bad!r}") from None
        if not all(np.isfinite(values)):
            raise CloudParseError(path, lineno, "non-finite coordinate")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise CloudParseError(path, lineno, f"expected {width} columns, found {len(values)}")
        rows.append(values)
    if not rows:
        raise CloudParseError(path, 0, "no data rows")
    return np.array(rows, dtype=float)


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_cloud(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such cloud file: {path}")
    with open(path) as fh:
        return parse_cloud(fh.read(), str(path))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
