"""Scenario generation: placement, unit-disk links, bounded noise and motion."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .geom import default_grid_res

EPSILON_MODES = ("errorOnly", "errorPlusMotion")
TRIANGLE_MODES = ("random", "special")

# accepted camelCase spellings of ScenarioConfig fields in JSON documents
_ALIASES = {
    "areaSize": "area_size",
    "dMax": "d_max",
    "dmax": "d_max",
    "epsilonMode": "epsilon_mode",
    "triangleMode": "triangle_mode",
    "gridRes": "grid_res",
    "h": "grid_res",
}


@dataclass(frozen=True)
class ScenarioConfig:
    area_size: float = 100.0
    n: int = 100
    r: float = 30.0
    delta: float = 1.0
    d_max: float = 0.0
    epsilon_mode: str = "errorOnly"
    triangle_mode: str = "special"
    grid_res: Optional[float] = None
    seed: int = 0
    trials: int = 100

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.delta < 0 or self.d_max < 0:
            raise ValueError("delta and d_max must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.area_size <= 0:
            raise ValueError("area_size must be positive")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.triangle_mode not in TRIANGLE_MODES:
            raise ValueError(f"triangle_mode must be one of {TRIANGLE_MODES}")
        if self.grid_res is not None and self.grid_res <= 0:
            raise ValueError("grid_res must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def epsilon(self) -> float:
        """Deviation budget assumed by the localizers."""
        if self.epsilon_mode == "errorPlusMotion":
            return self.delta + self.d_max
        return self.delta

    @property
    def h(self) -> float:
        return self.grid_res if self.grid_res is not None else default_grid_res(self.epsilon)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            name = _ALIASES.get(key, key)
            if name not in names:
                raise ValueError(f"unknown config key: {key!r}")
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class NetworkInstance:
    """Node positions, unit-disk edges and one measured distance per edge.

    ``measured`` is an ``(n, n)`` symmetric matrix holding NaN off the edge set.
    """

    positions: np.ndarray
    r: float
    measured: np.ndarray
    neighbors: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.positions)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    def d_hat(self, i: int, j: int) -> float:
        d = self.measured[i, j]
        if np.isnan(d):
            raise KeyError(f"no edge between {i} and {j}")
        return float(d)

    def true_distance(self, i: int, j: int) -> float:
        # same formula as the stored distances, so delta=0 compares exactly
        return float(np.sqrt(((self.positions[i] - self.positions[j]) ** 2).sum()))

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(i, j)`` with ``i < j`` in lexicographic order."""
        iu, ju = np.nonzero(np.triu(~np.isnan(self.measured), k=1))
        return list(zip(iu.tolist(), ju.tolist()))

    def true_distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff**2).sum(-1))

    def max_deviation(self) -> float:
        """Largest ``|d - d_hat|`` over the edge set."""
        mask = ~np.isnan(self.measured)
        if not mask.any():
            return 0.0
        return float(np.abs(self.true_distances()[mask] - self.measured[mask]).max())

    def components(self) -> int:
        adj = csr_matrix(~np.isnan(self.measured))
        return int(connected_components(adj, directed=False)[0])

    def is_connected(self) -> bool:
        return self.components() == 1

    def with_measured(self, measured: np.ndarray) -> "NetworkInstance":
        return dataclasses.replace(self, measured=measured)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "positions": self.positions.tolist(),
            "edges": [[i, j, float(self.measured[i, j])] for i, j in self.edges()],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkInstance":
        inst = network_from_positions(np.asarray(doc["positions"], dtype=float), doc["r"])
        measured = np.full_like(inst.measured, np.nan)
        for i, j, d in doc["edges"]:
            measured[i, j] = measured[j, i] = d
        if not np.array_equal(np.isnan(measured), np.isnan(inst.measured)):
            raise ValueError("edge list does not match the unit-disk graph of the positions")
        return inst.with_measured(measured)


def network_from_positions(positions, r: float) -> NetworkInstance:
    """Unit-disk graph over ``positions`` with exact distances as measurements."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    adj = dist <= r
    np.fill_diagonal(adj, False)
    measured = np.where(adj, dist, np.nan)
    neighbors = tuple(frozenset(np.flatnonzero(row).tolist()) for row in adj)
    return NetworkInstance(pos, float(r), measured, neighbors)


def generate_network(cfg: ScenarioConfig, rng: np.random.Generator) -> NetworkInstance:
    positions = rng.uniform(0.0, cfg.area_size, size=(cfg.n, 2))
    return network_from_positions(positions, cfg.r)


def _clamp(true_d, d_hat, epsilon):
    dev = d_hat - true_d
    return np.where(np.abs(dev) > epsilon, true_d + epsilon * np.sign(dev), d_hat)


def measure_distances(inst: NetworkInstance, delta: float, epsilon: float, rng: np.random.Generator) -> NetworkInstance:
    """Gaussian ranging noise ``|d + e|``, then clamp ``|d - d_hat|`` to ``epsilon``.

    One draw per edge in ``edges()`` order.
    """
    if delta < 0 or epsilon < 0:
        raise ValueError("delta and epsilon must be non-negative")
    edges = inst.edges()
    if not edges or delta == 0:
        return inst
    iu, ju = np.array(edges).T
    d = inst.measured[iu, ju]
    raw = np.abs(d + rng.normal(0.0, delta, size=len(edges)))
    d_hat = _clamp(d, raw, epsilon)
    out = inst.measured.copy()
    out[iu, ju] = out[ju, iu] = d_hat
    return inst.with_measured(out)


def apply_motion(inst: NetworkInstance, d_max: float, rng: np.random.Generator, epsilon: Optional[float] = None) -> NetworkInstance:
    """Perturb every measured distance by ``U(-d_max, d_max)``, floored at 0.

    Positive draws mean the endpoints separated during the epoch.  With
    ``epsilon`` given, the combined deviation from the true distance is clamped
    to it.  Edges are not re-derived.
    """
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    edges = inst.edges()
    if d_max == 0 or not edges:
        return inst
    iu, ju = np.array(edges).T
    d_hat = np.maximum(inst.measured[iu, ju] + rng.uniform(-d_max, d_max, size=len(edges)), 0.0)
    if epsilon is not None:
        d = np.hypot(*(inst.positions[iu] - inst.positions[ju]).T)
        d_hat = np.maximum(_clamp(d, d_hat, epsilon), 0.0)
    out = inst.measured.copy()
    out[iu, ju] = out[ju, iu] = d_hat
    return inst.with_measured(out)


def make_instance(cfg: ScenarioConfig, rng: np.random.Generator) -> NetworkInstance:
    """Placement, noise (clamped to delta) and motion (clamped to cfg.epsilon)."""
    inst = generate_network(cfg, rng)
    inst = measure_distances(inst, cfg.delta, cfg.delta, rng)
    return apply_motion(inst, cfg.d_max, rng, epsilon=cfg.epsilon)
