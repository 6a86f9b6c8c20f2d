"""JSON model configuration: parsing, validation, path-addressed errors.

A config file has four blocks::

    {
      "plant":   {"A": ..., "B": ..., "D": ..., "R": ..., "M": ...,
                  "C": [per-query list of per-net-state matrices],
                  "F": [same layout]},
      "network": {"N": 1, "queries": 2, "P": [per-query N x N matrices],
                  "lambda": [[N x queries]], "net_cost": [[N x queries]],
                  "s_circ": 0},
      "solver":  {"alpha": 1.0, "tol": 1e-8, "max_iter": 20000,
                  "r_max": null, "max_states": 20000, "dedup_tol": 1e-9},
      "sim":     {"T": 5000, "replications": 200, "base_seed": 0}
    }

Scalars are accepted wherever a 1x1 matrix is expected.  Every parse failure
names the offending path, e.g. ``network.P[1] row 0 sums to 0.97``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import NetworkModel, PlantModel, validate
from .psd import CovMatrix

_NETWORK_PREFIXES = ("P[", "loss", "net_cost", "s_circ")


def _address(msg: str) -> str:
    """Prefix a validation message with the config block it refers to."""
    if msg.startswith(_NETWORK_PREFIXES):
        return "network." + msg
    return "plant: " + msg


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1.0
    tol: float = 1e-8
    max_iter: int = 20_000
    r_max: float | None = None
    max_states: int = 20_000
    dedup_tol: float = 1e-9
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    T: int = 5_000
    replications: int = 200
    base_seed: int = 0


@dataclass(frozen=True)
class ModelConfig:
    plant: PlantModel
    net: NetworkModel
    solver: SolverConfig = field(default_factory=SolverConfig)
    sim: SimConfig = field(default_factory=SimConfig)


def _as_matrix(raw, path: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not numeric: {exc}") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ConfigError(f"{path} must be a matrix, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path} contains non-finite entries")
    return arr


def _require(block: dict, key: str, path: str):
    if key not in block:
        raise ConfigError(f"{path}.{key} is missing")
    return block[key]


def _block(doc: dict, name: str, required: bool = True) -> dict:
    raw = doc.get(name)
    if raw is None:
        if required:
            raise ConfigError(f"{name} block is missing")
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be an object")
    return raw


def _parse_sensor_table(raw, name: str, num_queries: int, num_states: int):
    if not isinstance(raw, list) or len(raw) != num_queries:
        raise ConfigError(
            f"plant.{name} must be a list with one entry per query "
            f"({num_queries}), got {type(raw).__name__} of length "
            f"{len(raw) if isinstance(raw, list) else 'n/a'}"
        )
    table = []
    for q, per_state in enumerate(raw):
        if not isinstance(per_state, list):
            raise ConfigError(f"plant.{name}[{q}] must be a list per net state")
        if len(per_state) == 1 and num_states > 1:
            per_state = per_state * num_states  # shared across net states
        if len(per_state) != num_states:
            raise ConfigError(
                f"plant.{name}[{q}] must have {num_states} entries, got {len(per_state)}"
            )
        table.append(
            tuple(
                _as_matrix(entry, f"plant.{name}[{q}][{s}]")
                for s, entry in enumerate(per_state)
            )
        )
    return tuple(table)


def parse_config(doc: dict) -> ModelConfig:
    """Build validated models and solver/sim settings from a parsed JSON object."""
    if not isinstance(doc, dict):
        raise ConfigError("top-level config must be an object")

    plant_block = _block(doc, "plant")
    net_block = _block(doc, "network")

    a = _as_matrix(_require(plant_block, "A", "plant"), "plant.A")
    d = plant_block.get("D")
    if d is None:
        raise ConfigError("plant.D is missing")
    d = _as_matrix(d, "plant.D")
    dim = a.shape[0]
    if a.shape != (dim, dim):
        raise ConfigError(f"plant.A must be square, got shape {a.shape}")
    b = _as_matrix(plant_block.get("B", np.zeros((dim, 1))), "plant.B")
    r = _as_matrix(plant_block.get("R", np.eye(dim)), "plant.R")
    m = _as_matrix(plant_block.get("M", np.eye(b.shape[1])), "plant.M")

    try:
        n_states = int(net_block.get("N", 1))
        num_queries = int(_require(net_block, "queries", "network"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"network block has a non-integer size field: {exc}") from None
    if n_states < 1:
        raise ConfigError(f"network.N must be positive, got {n_states}")
    if num_queries < 1:
        raise ConfigError(f"network.queries must be positive, got {num_queries}")

    c_table = _parse_sensor_table(
        _require(plant_block, "C", "plant"), "C", num_queries, n_states
    )
    f_table = _parse_sensor_table(
        _require(plant_block, "F", "plant"), "F", num_queries, n_states
    )

    raw_p = net_block.get("P")
    if raw_p is None:
        if n_states == 1:
            p_list = tuple(np.ones((1, 1)) for _ in range(num_queries))
        else:
            raise ConfigError("network.P is missing and N > 1")
    else:
        if not isinstance(raw_p, list) or len(raw_p) != num_queries:
            raise ConfigError(
                f"network.P must list one transition matrix per query ({num_queries})"
            )
        p_list = tuple(_as_matrix(pq, f"network.P[{q}]") for q, pq in enumerate(raw_p))

    lam = _as_matrix(_require(net_block, "lambda", "network"), "network.lambda")
    if lam.shape == (1, num_queries) and n_states > 1:
        lam = np.tile(lam, (n_states, 1))
    net_cost = _as_matrix(
        net_block.get("net_cost", np.zeros((n_states, num_queries))), "network.net_cost"
    )
    if net_cost.shape == (1, num_queries) and n_states > 1:
        net_cost = np.tile(net_cost, (n_states, 1))
    s_circ = int(net_block.get("s_circ", 0))

    try:
        plant = PlantModel(
            A=a, B=b, D=d, R=CovMatrix(r), M=CovMatrix(m), C=c_table, F=f_table
        )
        net = NetworkModel(
            P=p_list, loss=lam, net_cost=net_cost, s_circ=s_circ
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"model construction failed: {exc}") from None

    report = validate(plant, net)
    if not report.ok:
        raise ConfigError("; ".join(_address(msg) for msg in report.errors))

    solver_block = _block(doc, "solver", required=False)
    sim_block = _block(doc, "sim", required=False)
    try:
        solver = SolverConfig(
            alpha=float(solver_block.get("alpha", 1.0)),
            tol=float(solver_block.get("tol", 1e-8)),
            max_iter=int(solver_block.get("max_iter", 20_000)),
            r_max=(
                None
                if solver_block.get("r_max") is None
                else float(solver_block["r_max"])
            ),
            max_states=int(solver_block.get("max_states", 20_000)),
            dedup_tol=float(solver_block.get("dedup_tol", 1e-9)),
            seed=int(solver_block.get("seed", 0)),
        )
        sim = SimConfig(
            T=int(sim_block.get("T", 5_000)),
            replications=int(sim_block.get("replications", 200)),
            base_seed=int(sim_block.get("base_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver/sim block has a malformed field: {exc}") from None
    return ModelConfig(plant=plant, net=net, solver=solver, sim=sim)


def load_config(path) -> ModelConfig:
    """Read and parse a JSON config file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(doc)
