"""CSV ingestion and the in-memory count dataset."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .regression import Observation


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class ColumnBindings:
    count: str
    covariates: tuple[str, ...] = ()
    exposure: str | None = None
    weight: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        bound = [self.count, *self.covariates]
        bound += [c for c in (self.exposure, self.weight) if c is not None]
        if len(set(bound)) != len(bound):
            raise DataError(f"a column is bound twice: {bound}")


@dataclass
class CountDataset:
    """Observations held column-wise.

    ``covariates`` has shape (n, P); ``exposure`` and ``weights`` default to 1.
    """

    counts: np.ndarray
    covariates: np.ndarray
    exposure: np.ndarray
    weights: np.ndarray
    covariate_names: tuple[str, ...] = ()
    source_path: str = ""
    bindings: ColumnBindings | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        n = self.counts.size
        cov = np.asarray(self.covariates, dtype=float)
        self.covariates = cov.reshape(n, -1) if cov.size else np.zeros((n, 0))
        self.exposure = np.broadcast_to(np.asarray(self.exposure, dtype=float), (n,)).copy()
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (n,)).copy()
        self.covariate_names = tuple(self.covariate_names)
        if len(self.covariate_names) != self.covariates.shape[1]:
            raise DataError(f"{len(self.covariate_names)} covariate names for "
                            f"{self.covariates.shape[1]} covariate columns")
        if np.any(self.counts < 0):
            raise DataError("counts must be >= 0")
        if np.any(~(self.exposure > 0)) or not np.all(np.isfinite(self.exposure)):
            raise DataError("exposure must be positive and finite")
        if np.any(~(self.weights >= 0)) or not np.all(np.isfinite(self.weights)):
            raise DataError("weights must be finite and >= 0")
        if not np.all(np.isfinite(self.covariates)):
            raise DataError("covariates must be finite")

    @classmethod
    def from_arrays(cls, counts, covariates=None, exposure=1.0, weights=1.0, covariate_names=None, **kw):
        counts = np.asarray(counts)
        n = counts.size
        cov = np.zeros((n, 0)) if covariates is None else np.asarray(covariates, dtype=float).reshape(n, -1)
        if covariate_names is None:
            covariate_names = tuple(f"x{k + 1}" for k in range(cov.shape[1]))
        return cls(counts, cov, exposure, weights, covariate_names, **kw)

    @classmethod
    def from_observations(cls, rows, covariate_names=()) -> "CountDataset":
        rows = list(rows)
        p = len(covariate_names)
        cov = np.array([r.covariates for r in rows], dtype=float).reshape(len(rows), p)
        return cls(np.array([r.count for r in rows]), cov, np.array([r.exposure_t for r in rows]),
                   np.array([r.weight for r in rows]), covariate_names)

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def rows(self) -> list[Observation]:
        return [Observation(int(k), tuple(x), float(t), float(w))
                for k, x, t, w in zip(self.counts, self.covariates, self.exposure, self.weights)]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def with_weights(self, weights) -> "CountDataset":
        return replace(self, weights=np.asarray(weights, dtype=float))

    def expanded(self) -> "CountDataset":
        """Repeat each row by its (integer) weight, giving unit weights."""
        w = self.weights
        if np.any(w != np.round(w)):
            raise DataError("expansion needs integer weights")
        reps = w.astype(np.int64)
        return replace(self, counts=np.repeat(self.counts, reps), covariates=np.repeat(self.covariates, reps, axis=0),
                       exposure=np.repeat(self.exposure, reps), weights=np.ones(int(reps.sum())))

    def select(self, names) -> "CountDataset":
        names = tuple(names)
        idx = [self.covariate_names.index(n) for n in names]
        return replace(self, covariates=self.covariates[:, idx], covariate_names=names)


def _number(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: malformed number {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return v


def parse_dataset(path, bindings: ColumnBindings) -> CountDataset:
    """Read a headed CSV.  Row numbers in errors count data rows from 1."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _parse(fh, bindings, str(path))


def parse_text(text: str, bindings: ColumnBindings, source: str = "<string>") -> CountDataset:
    return _parse(io.StringIO(text), bindings, source)


def _parse(fh, bindings: ColumnBindings, source: str) -> CountDataset:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{source}: empty file, header row expected") from None
    wanted = [bindings.count, *bindings.covariates]
    wanted += [c for c in (bindings.exposure, bindings.weight) if c is not None]
    unknown = [c for c in wanted if c not in header]
    if unknown:
        raise DataError(f"{source}: unknown column(s) {unknown}; header has {header}")
    pos = {c: header.index(c) for c in wanted}

    counts, cov, expo, wts = [], [], [], []
    missing = []
    for row_no, rec in enumerate(reader, start=1):
        if not any(cell.strip() for cell in rec):
            continue
        cells = {c: (rec[pos[c]].strip() if pos[c] < len(rec) else "") for c in wanted}
        empty = [c for c, v in cells.items() if v == ""]
        if empty:
            missing.append((row_no, empty))
            continue
        k = _number(cells[bindings.count], row_no, bindings.count)
        if k != int(k):
            raise DataError(f"row {row_no}, column {bindings.count!r}: count must be an integer, got {cells[bindings.count]!r}")
        if k < 0:
            raise DataError(f"row {row_no}, column {bindings.count!r}: negative count {cells[bindings.count]!r}")
        counts.append(int(k))
        cov.append([_number(cells[c], row_no, c) for c in bindings.covariates])
        if bindings.exposure is not None:
            t = _number(cells[bindings.exposure], row_no, bindings.exposure)
            if not t > 0:
                raise DataError(f"row {row_no}, column {bindings.exposure!r}: exposure must be positive, got {t}")
            expo.append(t)
        if bindings.weight is not None:
            w = _number(cells[bindings.weight], row_no, bindings.weight)
            if w < 0:
                raise DataError(f"row {row_no}, column {bindings.weight!r}: negative weight {w}")
            wts.append(w)
    if missing:
        listing = "; ".join(f"row {r}: {', '.join(cols)}" for r, cols in missing[:20])
        more = f" (and {len(missing) - 20} more)" if len(missing) > 20 else ""
        raise DataError(f"{source}: missing values in bound columns: {listing}{more}")
    if not counts:
        raise DataError(f"{source}: no data rows")
    n = len(counts)
    return CountDataset(np.array(counts), np.array(cov, dtype=float).reshape(n, len(bindings.covariates)),
                        np.array(expo) if expo else 1.0, np.array(wts) if wts else 1.0,
                        bindings.covariates, source, bindings)


def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(ds: CountDataset, count_name: str = "count", exposure_name: str | None = "t") -> str:
    """Serialise in the schema :func:`parse_dataset` reads (floats round-trip exactly)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [count_name, *ds.covariate_names]
    if exposure_name:
        header.append(exposure_name)
    writer.writerow(header)
    for k in range(len(ds)):
        rec = [str(int(ds.counts[k]))] + [_fmt(v) for v in ds.covariates[k]]
        if exposure_name:
            rec.append(_fmt(ds.exposure[k]))
        writer.writerow(rec)
    return buf.getvalue()


def write_dataset(ds: CountDataset, path, **kw) -> None:
    Path(path).write_text(dataset_to_csv(ds, **kw), encoding="utf-8")
