"""Text formats: matrices, DAGs and estimate records."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .ensemble import EnsembleEstimate
from .errors import InputError
from .graph import Dag, format_dag, parse_dag
from .linalg import SYMMETRY_TOL, as_sym

ESTIMATE_FORMAT_VERSION = 1


def format_matrix(A: ArrayLike) -> str:
    """Header ``"rows cols"`` then one line per row, 17 significant digits."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in A]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, symmetric: bool = False) -> NDArray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty matrix file")
    try:
        rows, cols = (int(tok) for tok in lines[0].split())
        A = np.array([[float(tok) for tok in ln.split()] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise InputError(f"malformed matrix text: {exc}") from None
    if rows < 1 or cols < 1 or A.shape != (rows, cols):
        raise InputError(f"header says {rows} x {cols} but the body has shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix contains non-finite values")
    return as_sym(A, SYMMETRY_TOL) if symmetric else A


def read_matrix(path: str | Path, symmetric: bool = False) -> NDArray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_matrix(text, symmetric)


def write_matrix(path: str | Path, A: ArrayLike) -> None:
    Path(path).write_text(format_matrix(A))


def read_dag(path: str | Path) -> Dag:
    try:
        return parse_dag(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def write_dag(path: str | Path, dag: Dag) -> None:
    Path(path).write_text(format_dag(dag))


def estimate_record(est: EnsembleEstimate, seed: int | None, config: dict[str, Any]) -> dict[str, Any]:
    """Plain-data view of an estimate; permutations are stored 1-based."""
    return {
        "format_version": ESTIMATE_FORMAT_VERSION,
        "variant": est.variant.value,
        "seed": seed,
        "config": config,
        "K": len(est.permutations),
        "sigma": [[s + 1 for s in perm.sigma] for perm in est.permutations],
        "dag_edge_counts": [dag.n_edges for dag in est.per_perm_dags],
        "tau_b": est.tau_b,
        "L_bar": est.L_bar.tolist(),
        "D_bar": est.D_bar.tolist(),
        "L_bar_tau": est.L_bar_tau.tolist(),
        "omega_check_tau": est.omega_check_tau.tolist(),
    }


def dumps_record(record: dict[str, Any]) -> str:
    # repr-based float output round-trips exactly and is stable across runs
    return json.dumps(record, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, record: dict[str, Any]) -> None:
    Path(path).write_text(dumps_record(record))
