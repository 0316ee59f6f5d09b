"""Column-oriented categorical datasets and their CSV + JSON-schema file format."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import SchemaError

PROVENANCES = ("observational", "experimental", "test")


class DiscreteDataset:
    """Rows of 0-based category indices with a fixed arity per variable.

    Parameters
    ----------
    variables : sequence of (name, arity)
        Arity must be at least 2; names must be unique.
    data : array-like of shape (n_rows, n_variables)
    provenance : {"observational", "experimental", "test"}
    """

    def __init__(self, variables, data=None, provenance="observational"):
        variables = tuple((str(n), int(a)) for n, a in variables)
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate variable names")
        for n, a in variables:
            if a < 2:
                raise SchemaError(f"variable {n!r} has arity {a}; need >= 2")
        if provenance not in PROVENANCES:
            raise SchemaError(f"unknown provenance {provenance!r}")
        if data is None:
            data = np.zeros((0, len(variables)), dtype=np.int64)
        data = np.asarray(data, dtype=np.int64)
        if data.ndim != 2 or data.shape[1] != len(variables):
            raise SchemaError(f"data shape {data.shape} does not match {len(variables)} variables")
        arities = np.array([a for _, a in variables], dtype=np.int64)
        if data.size and ((data < 0).any() or (data >= arities).any()):
            col = int(np.argmax(((data < 0) | (data >= arities)).any(axis=0)))
            raise SchemaError(f"column {names[col]!r} has values outside [0, {arities[col]})")
        data.setflags(write=False)
        self.variables = variables
        self.data = data
        self.provenance = provenance
        self._pos = {n: i for i, n in enumerate(names)}

    @classmethod
    def from_columns(cls, columns: dict, arities: dict, provenance="observational"):
        names = list(columns)
        data = np.column_stack([np.asarray(columns[n], dtype=np.int64) for n in names]) \
            if names else None
        return cls([(n, arities[n]) for n in names], data, provenance)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.variables)

    @property
    def schema(self) -> dict:
        return dict(self.variables)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"DiscreteDataset({len(self)} rows, {self.names}, {self.provenance})"

    def position(self, name) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def arity(self, name) -> int:
        return self.variables[self.position(name)][1]

    def column(self, name) -> np.ndarray:
        return self.data[:, self.position(name)]

    def rows(self, index) -> "DiscreteDataset":
        return DiscreteDataset(self.variables, self.data[index], self.provenance)

    def select(self, names) -> "DiscreteDataset":
        pos = [self.position(n) for n in names]
        return DiscreteDataset([self.variables[p] for p in pos], self.data[:, pos], self.provenance)

    def concat(self, other: "DiscreteDataset", provenance=None) -> "DiscreteDataset":
        if other.schema != self.schema:
            raise SchemaError("cannot concatenate datasets with different schemas")
        other_data = other.data[:, [other.position(n) for n in self.names]]
        return DiscreteDataset(self.variables, np.vstack([self.data, other_data]),
                               provenance or self.provenance)

    def with_provenance(self, provenance) -> "DiscreteDataset":
        return DiscreteDataset(self.variables, self.data, provenance)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            w.writerows(self.data.tolist())

    @classmethod
    def read_csv(cls, path, schema: dict, provenance="observational") -> "DiscreteDataset":
        """Read a headed CSV of integer categories; ``schema`` maps name to arity.

        Columns not listed in the schema are rejected so that typos surface.
        """
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
        unknown = [h for h in header if h not in schema]
        if unknown:
            raise SchemaError(f"{path}: columns {unknown} missing from schema")
        missing = [n for n in schema if n not in header]
        if missing:
            raise SchemaError(f"{path}: schema variables {missing} missing from CSV")
        try:
            data = np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
        except ValueError as exc:
            raise SchemaError(f"{path}: non-integer cell ({exc})") from None
        if not rows:
            data = np.zeros((0, len(header)), dtype=np.int64)
        return cls([(h, schema[h]) for h in header], data, provenance)


def load_schema(path) -> dict:
    schema = json.loads(Path(path).read_text())
    if not isinstance(schema, dict) or not all(isinstance(v, int) for v in schema.values()):
        raise SchemaError(f"{path}: schema must map variable names to integer arities")
    return schema


def save_schema(schema: dict, path) -> None:
    Path(path).write_text(json.dumps(schema, indent=2) + "\n")
