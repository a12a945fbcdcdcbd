"""Problem files, CSV sample sets and JSON helpers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gmm import Gmm, em_fit
from .system import LtvSystem, QuadraticCost


class ConfigError(ValueError):
    """Malformed or inconsistent input file."""


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    system: LtvSystem
    cost: QuadraticCost
    initial: Gmm
    desired: Gmm
    seed: int = 0
    out_dir: str | None = None


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else fmt(v) for v in row])


def read_samples_csv(path) -> np.ndarray:
    """Numeric rows of a CSV file; a non-numeric first row is taken as the header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric sample value ({exc})") from None
    if data.size == 0:
        return np.empty((0, 0))
    return data


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def _matrix_stack(value, count, name, column=False):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if not column:
            raise ConfigError(f"{name} must be a matrix or a list of matrices")
        arr = arr[:, None]
    if arr.ndim == 2:
        return np.broadcast_to(arr, (count,) + arr.shape)
    if arr.ndim == 3 and arr.shape[0] == count:
        return arr
    raise ConfigError(f"{name} must be one matrix or a list of {count} matrices")


def _load_gmm(entry, base: Path, name: str, seed: int) -> Gmm:
    if isinstance(entry, dict) and "file" in entry:
        return Gmm.from_dict(read_json(base / entry["file"]))
    return Gmm.from_dict(entry)


def _fit_from_samples(entry, base: Path, name: str, seed: int) -> Gmm:
    if "file" not in entry or "components" not in entry:
        raise ConfigError(f"{name} needs 'file' and 'components'")
    X = read_samples_csv(base / entry["file"])
    return em_fit(X, int(entry["components"]), seed=int(entry.get("seed", seed))).gmm


def problem_from_dict(data: dict, base_dir=".") -> ProblemConfig:
    base = Path(base_dir)
    try:
        N = int(data["N"])
        if N < 1:
            raise ConfigError("N must be a positive integer")
        A = _matrix_stack(data["A"], N, "A")
        B = _matrix_stack(data["B"], N, "B", column=True)
        system = LtvSystem(A, B)
        Q = _matrix_stack(data["Q"], N + 1, "Q")
        R = _matrix_stack(data["R"], N, "R")
        x_ref = np.asarray(data.get("x_ref", np.zeros(system.n)), dtype=float)
        if x_ref.ndim == 1:
            x_ref = np.broadcast_to(x_ref, (N + 1, x_ref.size))
        cost = QuadraticCost(Q, R, x_ref)
        seed = int(data.get("seed", 0))
        gmms = {}
        for side in ("initial", "desired"):
            has_gmm = f"{side}_gmm" in data
            has_samples = f"{side}_samples" in data
            if has_gmm == has_samples:
                raise ConfigError(f"give exactly one of '{side}_gmm' or '{side}_samples'")
            if has_gmm:
                gmms[side] = _load_gmm(data[f"{side}_gmm"], base, f"{side}_gmm", seed)
            else:
                gmms[side] = _fit_from_samples(data[f"{side}_samples"], base, f"{side}_samples", seed)
    except KeyError as exc:
        raise ConfigError(f"missing field {exc}") from None
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return ProblemConfig(system, cost, gmms["initial"], gmms["desired"], seed, data.get("out_dir"))


def load_problem(path) -> ProblemConfig:
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return problem_from_dict(data, path.parent)
