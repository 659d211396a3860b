"""Problem bundles on disk: Q1.mtx + Q2.mtx + problem.json in a directory.

Matrices are Matrix Market symmetric coordinate files (1-based, lower
triangle); the manifest holds the linear data with all reals written to 17
significant digits so a round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import SparseSymmetric, read_matrix_market, write_matrix_market
from .model import ConstraintSense, GtrsProblem, QuadraticForm

MANIFEST = "problem.json"
Q1_FILE = "Q1.mtx"
Q2_FILE = "Q2.mtx"


@dataclass
class IntervalProblemData:
    """Data of an interval-constrained bundle: min x'Ax - 2a'x, c1<=x'Bx<=c2."""

    a_mat: SparseSymmetric
    a_lin: np.ndarray
    b_mat: SparseSymmetric
    c1: float
    c2: float


def _fmt_float(v: float) -> str:
    return format(float(v), ".17g")


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt_float(x) for x in v) + "]"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _fmt_float(v)


def _write_manifest(path: Path, fields: dict) -> None:
    lines = [",\n".join('  "%s": %s' % (k, _fmt_value(v))
                        for k, v in fields.items())]
    path.write_text("{\n%s\n}\n" % lines[0])


def save_bundle(directory, obj, sense: ConstraintSense = ConstraintSense.INEQUALITY) -> Path:
    """Write a problem (or interval-problem tuple) as a bundle directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, GtrsProblem):
        write_matrix_market(directory / Q1_FILE, obj.objective.q)
        write_matrix_market(directory / Q2_FILE, obj.constraint.q)
        _write_manifest(directory / MANIFEST, {
            "n": obj.n,
            "b1": obj.objective.b,
            "b2": obj.constraint.b,
            "c": obj.constraint.c,
            "sense": obj.sense.value,
        })
    else:
        a_mat, a_lin, b_mat, c1, c2 = obj
        write_matrix_market(directory / Q1_FILE, a_mat)
        write_matrix_market(directory / Q2_FILE, b_mat)
        _write_manifest(directory / MANIFEST, {
            "n": a_mat.n,
            "b1": a_lin,
            "b2": np.zeros(a_mat.n),
            "c": 0.0,
            "sense": "ineq",
            "c1": c1,
            "c2": c2,
            "kind": "ip",
        })
    return directory


def _require(manifest: dict, key: str, path: Path):
    if key not in manifest:
        raise ValidationError("%s: missing field '%s'" % (path, key))
    return manifest[key]


def load_bundle(directory) -> GtrsProblem | IntervalProblemData:
    """Read a bundle directory back into problem data."""
    directory = Path(directory)
    mpath = directory / MANIFEST
    for fname in (MANIFEST, Q1_FILE, Q2_FILE):
        if not (directory / fname).exists():
            raise ValidationError("bundle is missing %s" % (directory / fname))
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("%s: invalid JSON (%s)" % (mpath, exc)) from exc

    n = int(_require(manifest, "n", mpath))
    b1 = np.asarray(_require(manifest, "b1", mpath), dtype=np.float64)
    b2 = np.asarray(_require(manifest, "b2", mpath), dtype=np.float64)
    c = float(_require(manifest, "c", mpath))
    sense_raw = _require(manifest, "sense", mpath)
    try:
        sense = ConstraintSense(sense_raw)
    except ValueError:
        raise ValidationError("%s: field 'sense' must be 'ineq' or 'eq', got %r"
                              % (mpath, sense_raw)) from None

    q1 = read_matrix_market(directory / Q1_FILE)
    q2 = read_matrix_market(directory / Q2_FILE)
    for name, mat in ((Q1_FILE, q1), (Q2_FILE, q2)):
        if mat.n != n:
            raise ValidationError("%s: dimension %d does not match manifest n=%d"
                                  % (directory / name, mat.n, n))
    if b1.shape != (n,) or b2.shape != (n,):
        raise ValidationError("%s: fields 'b1'/'b2' must have length n=%d"
                              % (mpath, n))

    if manifest.get("kind") == "ip":
        c1 = float(_require(manifest, "c1", mpath))
        c2 = float(_require(manifest, "c2", mpath))
        if c1 > c2:
            raise ValidationError("%s: 'c1' must not exceed 'c2'" % mpath)
        return IntervalProblemData(q1, b1, q2, c1, c2)
    return GtrsProblem(QuadraticForm(q1, b1), QuadraticForm(q2, b2, c), sense)
