"""Dataset loading, normalization and target corruption.

Two on-disk formats: sparse index:value lines ("libsvm") and dense CSV
with a header row.  Loading is strict: malformed input raises ValueError
naming the file and line instead of silently dropping rows.
"""

import csv

import numpy as np

from .datagen import NoiseSpec
from .losses import CLASSIFICATION, REGRESSION, DataSet


def _parse_libsvm(path):
    labels = []
    rows = []
    max_idx = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                lab = float(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: label {parts[0]!r} is not a number") from None
            pairs = []
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected index:value, got {tok!r}")
                try:
                    i = int(idx)
                    v = float(val)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad index:value pair {tok!r}") from None
                if i < 1:
                    raise ValueError(f"{path}:{lineno}: feature indices are 1-based, got {i}")
                pairs.append((i - 1, v))
            max_idx = max(max_idx, max((i for i, _ in pairs), default=-1) + 1)
            labels.append(lab)
            rows.append(pairs)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if max_idx == 0:
        raise ValueError(f"{path}: no features present")
    X = np.zeros((len(rows), max_idx))
    for r, pairs in enumerate(rows):
        for i, v in pairs:
            X[r, i] = v
    return X, np.array(labels)


def _parse_csv(path, target_column):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target_column is None:
            tcol = len(header) - 1
        elif isinstance(target_column, int):
            tcol = target_column
            if not (0 <= tcol < len(header)):
                raise ValueError(f"{path}: target column index {tcol} out of range")
        else:
            if target_column not in header:
                raise ValueError(f"{path}: no column named {target_column!r} in header")
            tcol = header.index(target_column)
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one feature column and one target column")
    A = np.array(rows)
    keep = [j for j in range(len(header)) if j != tcol]
    return A[:, keep], A[:, tcol], [header[j] for j in keep]


def _map_binary_labels(y, binary_classes, path):
    vals = set(np.unique(y).tolist())
    if vals <= {0.0, 1.0}:
        return y, None
    if vals <= {-1.0, 1.0}:
        return np.where(y > 0.0, 1.0, 0.0), None
    if binary_classes is not None:
        a, b = float(binary_classes[0]), float(binary_classes[1])
        mask = (y == a) | (y == b)
        if not mask.any():
            raise ValueError(f"{path}: classes {binary_classes} not present in targets")
        return np.where(y[mask] == b, 1.0, 0.0), mask
    raise ValueError(
        f"{path}: targets take {len(vals)} values {sorted(vals)[:6]}...; "
        "classification needs labels in {0,1} or {-1,+1}, or pass binary_classes "
        "to pick two classes"
    )


def load_dataset(path, fmt=None, target_column=None, binary_classes=None, task=CLASSIFICATION):
    """Load a dataset from disk.

    fmt is "libsvm" or "csv"; None sniffs from the extension (".csv" ->
    csv, anything else libsvm).  For classification, labels in {-1,+1}
    map to {0,1}; any other label set needs binary_classes=(neg, pos),
    which also filters the rows to those two classes.  Regression targets
    pass through untouched.
    """
    if task not in (CLASSIFICATION, REGRESSION):
        raise ValueError(f"unknown task {task!r}")
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "libsvm"
    if fmt == "libsvm":
        X, y = _parse_libsvm(path)
        columns = None
    elif fmt == "csv":
        X, y, columns = _parse_csv(path, target_column)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    mask = None
    if task == CLASSIFICATION:
        y, mask = _map_binary_labels(y, binary_classes, path)
        if mask is not None:
            X = X[mask]
    meta = {"source": str(path), "format": fmt, "task": task}
    if columns is not None:
        meta["columns"] = columns
    if binary_classes is not None:
        meta["binary_classes"] = [float(binary_classes[0]), float(binary_classes[1])]
    return DataSet(X, y, meta)


def save_dataset_csv(data, path):
    """Write features plus a final target column, full precision."""
    p = data.p
    header = ",".join([f"x{j}" for j in range(p)] + ["y"]) + "\n"
    with open(path, "w") as fh:
        fh.write(header)
        for i in range(data.n):
            vals = [repr(float(v)) for v in data.features[i]]
            vals.append(repr(float(data.targets[i])))
            fh.write(",".join(vals) + "\n")


def normalize_features(data):
    """Affinely map every feature column onto [-1, 1].

    Columns that are constant in the data map to 0 (their span carries no
    information and zero keeps them out of every inner product).  The
    column bounds used are recorded in the returned dataset's meta.
    """
    X = data.features
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    out = np.zeros_like(X)
    var = span > 0.0
    out[:, var] = 2.0 * (X[:, var] - lo[var]) / span[var] - 1.0
    meta = dict(data.meta)
    meta["normalization"] = {"lo": lo.tolist(), "hi": hi.tolist()}
    return DataSet(out, data.targets, meta)


def corrupt_targets(data, noise, seed):
    """Add two-component Gaussian noise to the targets: N(0,1) with
    probability 1 - delta, N(0, sigma^2) with probability delta, chosen
    per row.  Returns a new dataset; the original is untouched."""
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(**noise)
    rng = np.random.default_rng(seed)
    wide = rng.random(data.n) < noise.delta
    eps = rng.standard_normal(data.n) * np.where(wide, noise.sigma, 1.0)
    meta = dict(data.meta)
    meta["corruption"] = {"delta": noise.delta, "sigma": noise.sigma, "seed": int(seed)}
    return DataSet(data.features, data.targets + eps, meta)
