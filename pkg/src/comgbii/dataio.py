"""Dataset ingestion, design matrices, splitting and synthetic data."""

from __future__ import annotations

import csv
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import composite
from .errors import DataError
from .regression import location, shape_params

__all__ = [
    "ColumnSpec",
    "Schema",
    "Dataset",
    "DesignMatrix",
    "load_config",
    "read_csv",
    "write_csv",
    "parse_formula",
    "design_matrix",
    "split",
    "split_indices",
    "simulate_mixture",
    "simulate_composite",
    "MIXTURE_DESIGN",
]

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    type: str = NUMERIC

    def __post_init__(self):
        if self.type not in (NUMERIC, CATEGORICAL):
            raise DataError(f"column {self.name!r}: type must be 'numeric' or 'categorical', got {self.type!r}")


@dataclass(frozen=True)
class Schema:
    """Names the response column and types each covariate."""

    response: str
    covariates: tuple = ()

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        if "response" not in d:
            raise DataError("schema must name the response column")
        covs = []
        for c in d.get("covariates", []):
            covs.append(ColumnSpec(c) if isinstance(c, str) else ColumnSpec(c["name"], c.get("type", NUMERIC)))
        return cls(d["response"], tuple(covs))

    def to_dict(self) -> dict:
        return {"response": self.response, "covariates": [{"name": c.name, "type": c.type} for c in self.covariates]}


def load_config(path) -> dict:
    """Read a JSON or TOML document into a dict (by file extension)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: invalid TOML: {exc}") from exc
    try:
        return json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc


@dataclass
class Dataset:
    """A positive response with named covariate columns.

    Numeric columns are float arrays; categorical columns are arrays of
    strings with their sorted level list in ``levels``.
    """

    response_name: str
    y: np.ndarray
    columns: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        for name, col in self.columns.items():
            if len(col) != self.y.shape[0]:
                raise DataError(f"column {name!r} has {len(col)} rows, response has {self.y.shape[0]}")
        if not np.all(self.y > 0):
            bad = int(np.flatnonzero(~(self.y > 0))[0]) + 1
            raise DataError(f"row {bad}: response must be positive")

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.response_name,
            self.y[idx],
            {k: np.asarray(v)[idx] for k, v in self.columns.items()},
            dict(self.levels),
        )

    def summary(self) -> dict:
        y = self.y
        return {
            "n": self.n,
            "min": float(y.min()),
            "mean": float(y.mean()),
            "median": float(np.median(y)),
            "sd": float(y.std(ddof=1)) if self.n > 1 else 0.0,
            "max": float(y.max()),
        }


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col!r}: value {text!r} is not finite")
    return value


def read_csv(path, schema: Optional[Schema] = None, response: Optional[str] = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Args:
        path: File path.
        schema: Column typing.  Without it every non-response column is
            loaded, as numeric when all its cells parse and categorical
            otherwise.
        response: Response column when no schema is given (default: the
            first column).

    Raises:
        DataError: Missing columns, empty or unparsable cells and
            non-positive responses, each reported with the 1-based data row.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: file is empty") from None
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    index = {name: j for j, name in enumerate(header)}
    if schema is None:
        resp = response or header[0]
        specs = None
    else:
        resp = schema.response
        specs = list(schema.covariates)
    if resp not in index:
        raise DataError(f"{path}: response column {resp!r} not found in header {header}")
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} fields, found {len(row)}")
        for name, j in index.items():
            if row[j].strip() == "" and (specs is None or name == resp or any(c.name == name for c in specs)):
                raise DataError(f"row {r}, column {name!r}: missing value")
    y = np.empty(len(rows))
    jr = index[resp]
    for r, row in enumerate(rows, start=1):
        y[r - 1] = _parse_float(row[jr].strip(), r, resp)
        if not y[r - 1] > 0:
            raise DataError(f"row {r}, column {resp!r}: response must be positive, got {row[jr].strip()}")
    if specs is None:
        specs = []
        for name in header:
            if name == resp:
                continue
            cells = [row[index[name]].strip() for row in rows]
            try:
                [float(c) for c in cells]
                specs.append(ColumnSpec(name, NUMERIC))
            except ValueError:
                specs.append(ColumnSpec(name, CATEGORICAL))
    columns = {}
    levels = {}
    for spec in specs:
        if spec.name not in index:
            raise DataError(f"{path}: covariate column {spec.name!r} not found in header")
        j = index[spec.name]
        if spec.type == NUMERIC:
            columns[spec.name] = np.array([_parse_float(row[j].strip(), r, spec.name) for r, row in enumerate(rows, start=1)])
        else:
            values = np.array([row[j].strip() for row in rows], dtype=object)
            columns[spec.name] = values
            levels[spec.name] = sorted(set(values))
    return Dataset(resp, y, columns, levels)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset so that :func:`read_csv` reproduces it exactly."""
    names = [dataset.response_name] + list(dataset.columns)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        cols = [dataset.y] + [dataset.columns[n] for n in dataset.columns]
        for i in range(dataset.n):
            w.writerow([repr(float(c[i])) if not isinstance(c[i], str) else c[i] for c in cols])


_FORMULA = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*~\s*(.+?)\s*$")


def parse_formula(formula: str) -> tuple[str, list[str]]:
    """Parse ``"y ~ a + b"`` (or ``"y ~ 1"``) into the response and covariates."""
    m = _FORMULA.match(formula)
    if not m:
        raise DataError(f"cannot parse formula {formula!r}; expected 'response ~ term + term' or 'response ~ 1'")
    terms = [t.strip() for t in m.group(2).split("+")]
    covs = [t for t in terms if t not in ("1", "")]
    for t in covs:
        if not re.match(r"^[A-Za-z_][\w.]*$", t):
            raise DataError(f"unsupported formula term {t!r}")
    return m.group(1), covs


@dataclass
class DesignMatrix:
    matrix: np.ndarray
    names: list
    encoding: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.matrix.shape[1] - 1


def design_matrix(dataset: Dataset, covariates: Sequence[str] = (), encoding: Optional[dict] = None) -> DesignMatrix:
    """Intercept plus numeric columns and treatment-coded categoricals.

    The reference level of each categorical is its lexicographically first
    level, and the dummy for level L of column C is named ``C_L``.  Passing
    a previous ``encoding`` reuses its level lists so that new data maps to
    the same columns.
    """
    n = dataset.n
    cols = [np.ones(n)]
    names = ["(Intercept)"]
    enc = {}
    for name in covariates:
        if name not in dataset.columns:
            raise DataError(f"unknown covariate {name!r}; available: {sorted(dataset.columns)}")
        col = dataset.columns[name]
        if name in dataset.levels or (encoding and name in encoding):
            lv = list(encoding[name]) if encoding and name in encoding else list(dataset.levels[name])
            unknown = set(col) - set(lv)
            if unknown:
                raise DataError(f"column {name!r} has levels {sorted(unknown)} not in the encoding {lv}")
            enc[name] = lv
            for level in lv[1:]:
                cols.append((col == level).astype(float))
                names.append(f"{name}_{level}")
        else:
            cols.append(np.asarray(col, dtype=float))
            names.append(name)
    X = np.column_stack(cols)
    for j in range(1, X.shape[1]):
        if np.all(X[:, j] == X[0, j]):
            warnings.warn(f"design column {names[j]!r} is constant; the design is rank deficient", stacklevel=2)
    return DesignMatrix(X, names, enc)


def split_indices(n: int, ratio: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted row indices of a uniform random partition of size ceil(ratio n) / rest."""
    if not 0.0 < ratio < 1.0:
        raise DataError("split ratio must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil(ratio * n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(dataset: Dataset, ratio: float, seed=None) -> tuple[Dataset, Dataset]:
    """Uniform random partition into ceil(ratio n) training rows and the rest."""
    train_idx, test_idx = split_indices(dataset.n, ratio, seed)
    return dataset.subset(train_idx), dataset.subset(test_idx)


# Mixture design: Gamma body and GPD tail with log-linear covariate effects.
MIXTURE_DESIGN = {
    "n": 2000,
    "n_tail": 200,
    "beta_body": (2.0, 2.0, 1.5),
    "phi_body": 1.5,
    "beta_loc": (1.0, 0.5, 0.5),
    "beta_scale": (3.0, 0.5, 1.0),
    "xi": 1.5,
}


def simulate_mixture(
    n: int = 2000,
    n_tail: int = 200,
    beta_body: Sequence[float] = MIXTURE_DESIGN["beta_body"],
    phi_body: float = 1.5,
    gpd_params: tuple = (MIXTURE_DESIGN["beta_loc"], MIXTURE_DESIGN["beta_scale"], 1.5),
    seed=None,
) -> Dataset:
    """Gamma body rows followed by generalized Pareto tail rows.

    Body rows have mean exp(x'beta_body) and dispersion phi_body (Gamma shape
    1/phi).  Tail rows are GPD with location exp(x'beta_loc), scale
    exp(x'beta_scale) and shape xi.  Covariates are independent standard
    normals named x1, x2, ...
    """
    if not 0 <= n_tail < n:
        raise DataError("need 0 <= n_tail < n")
    beta_loc, beta_scale, xi = gpd_params
    k = len(beta_body) - 1
    if len(beta_loc) != k + 1 or len(beta_scale) != k + 1:
        raise DataError("all coefficient vectors must have the same length")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, k))
    X = np.column_stack([np.ones(n), Z])
    y = np.empty(n)
    n_body = n - n_tail
    mean = np.exp(X[:n_body] @ np.asarray(beta_body, dtype=float))
    shape = 1.0 / phi_body
    y[:n_body] = rng.gamma(shape, mean / shape)
    loc = np.exp(X[n_body:] @ np.asarray(beta_loc, dtype=float))
    scale = np.exp(X[n_body:] @ np.asarray(beta_scale, dtype=float))
    u = 1.0 - rng.random(n_tail)  # in (0, 1]
    if xi == 0:
        y[n_body:] = loc - scale * np.log(u)
    else:
        y[n_body:] = loc + scale * np.expm1(-xi * np.log(u)) / xi
    # the Gamma draw can underflow to zero for tiny means; keep the response positive
    y = np.maximum(y, np.finfo(float).tiny)
    return Dataset("y", y, {f"x{j + 1}": Z[:, j] for j in range(k)})


def simulate_composite(n: int, beta: Sequence[float], alpha: Sequence[float], seed=None) -> Dataset:
    """Draw from the composite regression with standard normal covariates x1..xk."""
    beta = np.asarray(beta, dtype=float)
    rng = np.random.default_rng(seed)
    k = beta.shape[0] - 1
    Z = rng.standard_normal((n, k))
    X = np.column_stack([np.ones(n), Z])
    z = composite.sample(n, shape_params(alpha), seed=rng)
    y = z * location(X, beta)
    return Dataset("y", y, {f"x{j + 1}": Z[:, j] for j in range(k)})
