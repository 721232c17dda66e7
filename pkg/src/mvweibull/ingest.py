"""Cohort CSV reading/writing and the covariate-specification config.

Cohort CSV: header row, comma separated, UTF-8. Columns ``time_1..time_d``
(days) and ``event_1..event_d`` (0/1) by default, plus covariate columns.
Empty fields are missing values; a row missing any required field is
dropped and counted in the :class:`IngestReport`.

Spec config: one ``key = value`` per line, ``#`` starts a comment::

    intercept = true
    scale_1 = sex_dummy, log_tmsrv, arrests_by_age, race, sextrt
    scale_2 = sex_dummy, log_tmsrv, arrests_by_age, race, educat
    scale_3 =

An empty or absent ``scale_k`` line means intercept only for that dimension.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .likelihood import DEFAULT_CENSOR_TIME, Cohort, RegressionSpec, pattern_histogram

MAX_DIAGNOSTICS = 200


@dataclass(frozen=True)
class CohortSchema:
    time_columns: tuple[str, ...]
    event_columns: tuple[str, ...]
    # None: every remaining column is a covariate
    covariate_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.time_columns) != len(self.event_columns):
            raise DataError("need one event column per time column")
        if len(self.time_columns) < 2:
            raise DataError("need at least two event types")

    @classmethod
    def default(cls, d: int = 3, covariates: Sequence[str] | None = None) -> "CohortSchema":
        return cls(
            tuple(f"time_{k + 1}" for k in range(d)),
            tuple(f"event_{k + 1}" for k in range(d)),
            None if covariates is None else tuple(covariates),
        )

    @classmethod
    def infer(cls, header: Sequence[str], covariates: Sequence[str] | None = None) -> "CohortSchema":
        d = len([h for h in header if re.fullmatch(r"time_\d+", h)])
        if d < 2:
            raise DataError("cannot infer schema: need columns time_1, time_2, ... and event_1, event_2, ...")
        return cls.default(d, covariates)

    @property
    def d(self) -> int:
        return len(self.time_columns)


@dataclass
class IngestReport:
    path: str
    t_c: float
    rows_read: int = 0
    rows_kept: int = 0
    rows_dropped: int = 0
    same_day_remapped: int = 0
    censored_times_normalized: int = 0
    diagnostics: list[dict] = field(default_factory=list)
    pattern_histogram: dict[str, int] = field(default_factory=dict)

    def note(self, row: int, message: str) -> None:
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append({"row": row, "message": message})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def load_cohort(path, schema: CohortSchema | None = None, t_c: float = DEFAULT_CENSOR_TIME) -> tuple[Cohort, IngestReport]:
    """Read a cohort CSV into a :class:`Cohort`.

    Normalisation: an observed event at day 0 is moved to day 1; a censored
    coordinate is set to ``t_c`` whatever the file says. Rows with missing or
    non-numeric required fields, flags outside {0, 1}, negative times, or
    observed times beyond ``t_c`` are dropped with a per-row diagnostic.
    Raises :class:`DataError` if the file has no header, lacks a schema
    column, or no valid rows remain.
    """
    path = Path(path)
    report = IngestReport(str(path), float(t_c))
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open cohort file {path}: {exc.strerror}") from exc

    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (a header row is required)") from None
        except csv.Error as exc:
            raise DataError(f"{path}: malformed CSV: {exc}") from exc
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        if schema is None:
            schema = CohortSchema.infer(header)
        role_cols = set(schema.time_columns) | set(schema.event_columns)
        covariates = schema.covariate_columns
        if covariates is None:
            covariates = tuple(h for h in header if h not in role_cols)
        required = list(schema.time_columns) + list(schema.event_columns) + list(covariates)
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: unknown column(s) {missing}; header has {header}")
        pos = {name: header.index(name) for name in required}
        d = schema.d

        times, flags, covs = [], [], {c: [] for c in covariates}
        row_no = 1
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                row_no += 1
                report.rows_read += 1
                report.rows_dropped += 1
                report.note(row_no, f"malformed CSV: {exc}")
                continue
            row_no += 1
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            report.rows_read += 1
            parsed = _parse_row(row, header, pos, schema, covariates, t_c, row_no, report)
            if parsed is None:
                report.rows_dropped += 1
                continue
            t, e, cv = parsed
            times.append(t)
            flags.append(e)
            for c in covariates:
                covs[c].append(cv[c])

    report.rows_kept = len(times)
    if not times:
        raise DataError(f"{path}: no valid rows ({report.rows_dropped} dropped)")
    cohort = Cohort(np.array(times, dtype=float).reshape(-1, d), np.array(flags, dtype=bool).reshape(-1, d), covs)
    report.pattern_histogram = pattern_histogram(cohort)
    return cohort, report


def _parse_row(row, header, pos, schema, covariates, t_c, row_no, report):
    if len(row) != len(header):
        report.note(row_no, f"expected {len(header)} fields, found {len(row)}")
        return None
    values = {}
    for name, i in pos.items():
        raw = row[i].strip()
        if raw == "":
            report.note(row_no, f"missing value in column {name!r}")
            return None
        try:
            values[name] = float(raw)
        except ValueError:
            report.note(row_no, f"non-numeric value {raw!r} in column {name!r}")
            return None
        if not np.isfinite(values[name]):
            report.note(row_no, f"non-finite value in column {name!r}")
            return None

    times, flags = [], []
    remapped = normalized = 0
    for tcol, ecol in zip(schema.time_columns, schema.event_columns):
        t, e = values[tcol], values[ecol]
        if e not in (0.0, 1.0):
            report.note(row_no, f"event flag {row[pos[ecol]].strip()!r} in column {ecol!r} is not 0/1")
            return None
        if t < 0:
            report.note(row_no, f"negative time in column {tcol!r}")
            return None
        if e == 1.0:
            if t > t_c:
                report.note(row_no, f"observed time {t:g} in column {tcol!r} exceeds censoring time {t_c:g}")
                return None
            if t == 0.0:
                t = 1.0
                remapped += 1
        elif t != t_c:
            t = float(t_c)
            normalized += 1
        times.append(t)
        flags.append(e == 1.0)
    if remapped:
        report.same_day_remapped += remapped
    if normalized:
        report.censored_times_normalized += normalized
        report.note(row_no, f"{normalized} censored time(s) set to {t_c:g}")
    return times, flags, {c: values[c] for c in covariates}


def write_cohort(cohort: Cohort, path, schema: CohortSchema | None = None) -> Path:
    """Write a cohort in the format :func:`load_cohort` reads (floats at full precision)."""
    schema = schema or CohortSchema.default(cohort.d)
    names = list(cohort.covariates)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(schema.time_columns) + list(schema.event_columns) + names)
        for i in range(cohort.n):
            w.writerow(
                [repr(float(t)) for t in cohort.times[i]]
                + [int(e) for e in cohort.occurred[i]]
                + [repr(float(cohort.covariates[c][i])) for c in names]
            )
    return path


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_regression_spec(text: str, d: int | None = None, columns: Sequence[str] | None = None) -> RegressionSpec:
    intercept = True
    lists: dict[int, tuple[str, ...]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"spec line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "intercept":
            if value.lower() in _TRUE:
                intercept = True
            elif value.lower() in _FALSE:
                intercept = False
            else:
                raise DataError(f"spec line {lineno}: intercept must be true/false")
            continue
        m = re.fullmatch(r"scale_(\d+)", key)
        if not m or int(m.group(1)) < 1:
            raise DataError(f"spec line {lineno}: unknown key {key!r}")
        k = int(m.group(1)) - 1
        if k in lists:
            raise DataError(f"spec line {lineno}: {key} given twice")
        names = tuple(s.strip() for s in value.split(",") if s.strip())
        if len(set(names)) != len(names):
            raise DataError(f"spec line {lineno}: duplicate covariate in {key}")
        lists[k] = names

    if d is None:
        d = max(lists) + 1 if lists else 0
    if d < 2:
        raise DataError("spec must cover at least two dimensions (pass d or list scale_1..scale_d)")
    if lists and max(lists) >= d:
        raise DataError(f"spec names scale_{max(lists) + 1} but the cohort has {d} dimensions")
    spec = RegressionSpec(tuple(lists.get(k, ()) for k in range(d)), intercept)
    if columns is not None:
        available = set(columns)
        for k, names in enumerate(spec.covariates):
            for name in names:
                if name not in available:
                    raise DataError(f"covariate {name!r} for scale_{k + 1} is not a cohort column")
    return spec


def load_regression_spec(path, d: int | None = None, columns: Sequence[str] | None = None) -> RegressionSpec:
    """Read a spec config; validate covariate names against ``columns`` when given."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read spec file {path}: {exc.strerror}") from exc
    return parse_regression_spec(text, d, columns)


def read_header(path) -> list[str]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return [h.strip() for h in next(csv.reader(fh), [])]
    except OSError as exc:
        raise DataError(f"cannot open cohort file {path}: {exc.strerror}") from exc
