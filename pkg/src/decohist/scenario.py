"""Scenario files: JSON documents describing a history space and its checks.

Complex numbers are ``[re, im]`` pairs; a bare real number is accepted as
shorthand.  A scenario either spells out ``hamiltonian``,
``initial_state``, ``times`` and ``partitions`` or names a measurement
``model`` that builds them.  See ``docs/scenario_format.md`` for the full
field list.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .hilbert import DEFAULT_TOL, ProjectorPartition, StructureError, hermitian_deviation
from .histories import HistorySpace
from .measurement import SpinPreparation, repeated_measurement_space, von_neumann_model
from .semantics import Predicate

SCHEMA_VERSION = 1
DEFAULT_TOLERANCES = {
    "structure": DEFAULT_TOL,
    "consistency": 1e-8,
    "sum_rule": 1e-10,
    "branching": 1e-10,
}


class ScenarioError(ValueError):
    pass


def bundled_names() -> list[str]:
    root = resources.files("decohist") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve(path_or_name: str) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    p = Path(path_or_name)
    if p.exists():
        return p
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    if name.endswith(".scenario"):
        name = name[:-9]
    cand = resources.files("decohist") / "scenarios" / f"{name}.json"
    if cand.is_file():
        return Path(str(cand))
    raise FileNotFoundError(f"no scenario file or bundled scenario named {path_or_name!r}")


def _complex(x, where: str) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise ScenarioError(f"{where}: expected a number or [re, im] pair, got {x!r}")


def _vector(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(f"{where}: expected a non-empty list")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(raw)], dtype=complex)


def _matrix(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(f"{where}: expected a non-empty list of rows")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(raw)]
    if any(r.size != len(rows) for r in rows):
        raise ScenarioError(f"{where}: matrix must be square")
    return np.stack(rows)


def _partition(raw, dim: int, tol: float, where: str) -> ProjectorPartition:
    cells = raw.get("cells") if isinstance(raw, dict) else None
    if not cells:
        raise ScenarioError(f"{where}.cells: expected a non-empty list of cells")
    labels = [c.get("label", str(i)) for i, c in enumerate(cells)]
    try:
        if all("basis" in c for c in cells):
            return ProjectorPartition.from_basis_sets(dim, [c["basis"] for c in cells], labels)
        mats = []
        for i, c in enumerate(cells):
            if "projector" in c:
                mats.append(_matrix(c["projector"], f"{where}.cells[{i}].projector"))
            elif "basis" in c:
                m = np.zeros((dim, dim), dtype=complex)
                m[c["basis"], c["basis"]] = 1.0
                mats.append(m)
            else:
                raise ScenarioError(f"{where}.cells[{i}]: needs 'basis' or 'projector'")
        if any(m.shape[0] != dim for m in mats):
            raise ScenarioError(f"{where}: projector dimension does not match the state")
        return ProjectorPartition.from_projectors(mats, labels, tol)
    except StructureError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


@dataclass
class Scenario:
    name: str
    raw: dict
    space: HistorySpace
    dims: tuple[int, ...]
    coarse_grainings: dict = field(default_factory=dict)
    predicates: list = field(default_factory=list)
    utterance_times: list = field(default_factory=list)
    model: dict | None = None
    nogo: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    golden: dict = field(default_factory=dict)
    source: str | None = None


def _model_space(model: dict, where: str = "model") -> HistorySpace:
    kind = model.get("kind")
    if "c" in model:
        prep = SpinPreparation(_complex(model["c"], f"{where}.c"))
    elif "c2" in model:
        prep = SpinPreparation.from_weight(float(model["c2"]))
    else:
        raise ScenarioError(f"{where}: needs 'c' or 'c2'")
    d = int(model.get("pointer_dim", 2))
    times = tuple(model.get("times", [1.0]))
    if kind == "von_neumann":
        env = model.get("env_state")
        env = None if env is None else _vector(env, f"{where}.env_state")
        return von_neumann_model(prep, d, times, env)
    if kind == "repeated":
        return repeated_measurement_space(prep, int(model["N"]), d, times, model.get("variant", "auto"))
    raise ScenarioError(f"{where}.kind: unknown measurement model {kind!r}")


def parse_scenario(raw: dict, source: str | None = None) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    ver = raw.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported version {ver!r}")
    name = raw.get("name") or (Path(source).stem if source else "scenario")
    tols = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
    tol = float(tols["structure"])
    model = raw.get("model")
    try:
        if model is not None:
            space = _model_space(model)
        else:
            for key in ("hamiltonian", "initial_state", "times"):
                if key not in raw:
                    raise ScenarioError(f"{key}: missing (or supply a 'model')")
            h = _matrix(raw["hamiltonian"], "hamiltonian")
            dev = hermitian_deviation(h)
            if dev > tol:
                raise ScenarioError(f"hamiltonian: hamiltonian not hermitian (max deviation {dev:.3e})")
            omega = _vector(raw["initial_state"], "initial_state")
            if omega.size != h.shape[0]:
                raise ScenarioError("initial_state: dimension does not match hamiltonian")
            times = [float(t) for t in raw["times"]]
            if "partitions" in raw:
                raw_parts = raw["partitions"]
                if len(raw_parts) != len(times):
                    raise ScenarioError("partitions: need one partition per sample time")
            elif "partition" in raw:
                raw_parts = [raw["partition"]] * len(times)
            else:
                raise ScenarioError("partitions: missing")
            parts = [_partition(p, omega.size, tol, f"partitions[{i}]") for i, p in enumerate(raw_parts)]
            space = HistorySpace(h, omega, tuple(times), tuple(parts), tol)
    except ScenarioError:
        raise
    except (StructureError, ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(f"{'model' if model is not None else 'scenario'}: {exc}") from None

    dims = tuple(int(d) for d in raw.get("dims", [space.dim]))
    if int(np.prod(dims)) != space.dim:
        raise ScenarioError(f"dims: product {int(np.prod(dims))} does not match dimension {space.dim}")

    cgs = {}
    for i, cg in enumerate(raw.get("coarse_grainings", [])):
        g = cg.get("grouping")
        if not isinstance(g, list) or len(g) != space.n_times:
            raise ScenarioError(f"coarse_grainings[{i}].grouping: need one entry per sample time")
        for k, gk in enumerate(g):
            if gk is not None and len(gk) != len(space.partitions[k]):
                raise ScenarioError(f"coarse_grainings[{i}].grouping[{k}]: must assign every cell")
        cgs[cg.get("name", f"grouping{i}")] = g
    try:
        preds = [Predicate.from_dict(p) for p in raw.get("predicates", [])]
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"predicates: {exc}") from None
    return Scenario(
        name=name, raw=raw, space=space, dims=dims, coarse_grainings=cgs, predicates=preds,
        utterance_times=[float(t) for t in raw.get("utterance_times", [])], model=model,
        nogo=raw.get("nogo", {}), tolerances=tols, seed=int(raw.get("seed", 0)),
        golden=raw.get("golden", {}), source=source,
    )


def load_scenario(path_or_name) -> Scenario:
    """Load and validate a scenario file (or bundled scenario name)."""
    p = resolve(str(path_or_name))
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}") from None
    return parse_scenario(raw, str(p))
