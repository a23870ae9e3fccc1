"""CSV ingestion and report writing.

Floats are written with ``repr`` so that draws read back from disk are
bit-identical to the ones written.
"""

import csv
import json

import numpy as np

from .exceptions import IngestionError, ValidationError
from .gibbs import ChainConfig, PosteriorSample
from .outcomes import TrialDataset


def _cell(row, col, lineno):
    v = row.get(col)
    if v is None or v.strip() == "":
        raise IngestionError(f"line {lineno}: missing value in column {col!r}",
                             row=lineno, column=col)
    return v.strip()


def _binary(row, col, lineno):
    v = _cell(row, col, lineno)
    if v not in ("0", "1", "0.0", "1.0"):
        raise IngestionError(f"line {lineno}: column {col!r} must be 0 or 1, got {v!r}",
                             row=lineno, column=col)
    return int(float(v))


def _number(row, col, lineno):
    v = _cell(row, col, lineno)
    try:
        x = float(v)
    except ValueError:
        raise IngestionError(f"line {lineno}: column {col!r} is not numeric: {v!r}",
                             row=lineno, column=col) from None
    if not np.isfinite(x):
        raise IngestionError(f"line {lineno}: column {col!r} is not finite", row=lineno,
                             column=col)
    return x


def standardize_covariates(z):
    """Center and scale columns with the sample mean and sd (ddof=1)."""
    z = np.asarray(z, dtype=float)
    if z.shape[1] == 0:
        return z, ()
    center = z.mean(axis=0)
    scale = z.std(axis=0, ddof=1) if z.shape[0] > 1 else np.ones(z.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    return (z - center) / scale, tuple(zip(center.tolist(), scale.tolist()))


def _read_rows(fh, path, config):
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    needed = list(config.outcomes) + [config.treatment] + list(config.covariates)
    for col in needed:
        if col not in header:
            raise IngestionError(f"column {col!r} not found in {path}", row=1, column=col)
    y, t, z = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if None in row:
            raise IngestionError(f"line {lineno}: more cells than header columns", row=lineno)
        y.append([_binary(row, c, lineno) for c in config.outcomes])
        t.append(_binary(row, config.treatment, lineno))
        z.append([_number(row, c, lineno) for c in config.covariates])
    return y, t, z


def load_dataset_csv(path, config):
    """Read a trial dataset from a UTF-8 CSV file with a header row.

    Outcome and treatment columns must be coded 0/1 and covariates numeric;
    every referenced column must exist and no cell may be empty.  Line
    numbers in errors count the header as line 1.  Covariates are
    standardized when ``config.standardize`` is set.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror}") from None
    try:
        with fh:
            y, t, z = _read_rows(fh, path, config)
    except UnicodeDecodeError:
        raise IngestionError(f"{path} is not valid UTF-8") from None
    if not y:
        raise IngestionError(f"{path} has no data rows")
    t = np.array(t)
    if t.min() == t.max():
        raise IngestionError(f"{path}: all subjects are in arm {t[0]}; need both arms")
    z = np.array(z, dtype=float).reshape(len(y), len(config.covariates))
    scaling = ()
    if config.standardize:
        z, scaling = standardize_covariates(z)
    return TrialDataset(np.array(y), t, z, tuple(config.covariates), tuple(config.outcomes),
                        scaling)


def dataset_summary(data):
    return {"n": data.n, "K": data.K, "arm_counts": {str(k): v for k, v in data.arm_counts().items()},
            "outcomes": list(data.outcome_names), "covariates": list(data.covariate_names),
            "standardization": [{"name": n, "center": c, "scale": s}
                                for n, (c, s) in zip(data.covariate_names, data.standardization)]}


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_posterior_csv(path, posterior, category_labels, term_names):
    """Long-format draws: chain, iteration, category, term, value."""
    rows = ((int(c), int(it), category_labels[int(q)], term_names[int(p)], v)
            for c, it, q, p, v in posterior.to_records())
    write_csv(path, ["chain", "iteration", "category", "term", "value"], rows)


def read_posterior_csv(path, category_labels, term_names, config=None, rhat=float("nan"),
                       converged=True):
    """Inverse of :func:`write_posterior_csv`."""
    cat_idx = {c: i for i, c in enumerate(category_labels)}
    term_idx = {t: i for i, t in enumerate(term_names)}
    recs = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    recs.append((int(row["chain"]), int(row["iteration"]),
                                 cat_idx[row["category"]], term_idx[row["term"]],
                                 float(row["value"])))
                except (KeyError, ValueError, TypeError):
                    raise IngestionError(f"{path} line {lineno}: malformed posterior record",
                                         row=lineno) from None
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror}") from None
    if not recs:
        raise IngestionError(f"{path} holds no draws")
    arr = np.array(recs)
    idx = arr[:, :4].astype(int)
    shape = tuple(idx.max(axis=0) + 1)
    if shape[2] != len(category_labels) or shape[3] != len(term_names) \
            or len(arr) != np.prod(shape):
        raise ValidationError(f"{path}: draws do not form a complete array")
    draws = np.empty(shape)
    draws[tuple(idx.T)] = arr[:, 4]
    config = config or ChainConfig(shape[1], 0, shape[0])
    return PosteriorSample(draws, config, rhat, converged)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj):
    """Deterministic JSON text (sorted keys, NaN written as null)."""
    def clean(v):
        if isinstance(v, float) and not np.isfinite(v):
            return None
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.ndarray, np.generic)):
            return clean(_jsonable(v))
        return v

    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False, default=_jsonable)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}",
                             row=exc.lineno) from None
