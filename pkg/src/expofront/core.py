"""Domain types and the two objectives: expected utility and group unfairness.

Items are indexed ``0..n-1`` and groups ``0..g-1`` internally.  Exposure
vectors live on the hyperplane ``sum(x) == sum(gamma)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionError, EmptyDistribution, InvalidInstance, ZeroRelevance

TARGET_POLICIES = ("merit", "size-proportional", "explicit")


def dcg_exposure(n: int) -> np.ndarray:
    """Position weights ``1 / log2(k + 1)`` for ranks ``k = 1..n``."""
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=float))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def canonical_groups(labels: Sequence) -> np.ndarray:
    """Map arbitrary group labels onto ``0..g-1`` (sorted label order)."""
    uniq = sorted(set(labels), key=lambda v: (str(type(v)), v))
    index = {lab: j for j, lab in enumerate(uniq)}
    return np.array([index[lab] for lab in labels], dtype=int)


def group_matrix(groups: np.ndarray, n_groups: Optional[int] = None) -> np.ndarray:
    """Binary ``g x n`` aggregator: ``(G @ x)[j]`` is the exposure of group j."""
    groups = np.asarray(groups, dtype=int)
    g = int(groups.max()) + 1 if n_groups is None else n_groups
    G = np.zeros((g, groups.size))
    G[groups, np.arange(groups.size)] = 1.0
    return G


def build_target_exposure(relevance, groups, gamma, policy: str = "merit", values=None) -> np.ndarray:
    """Per-group target exposure, always summing to ``sum(gamma)``.

    ``merit`` splits the total exposure by relevance share, ``size-proportional``
    by group size, and ``explicit`` passes ``values`` through after checking
    that they distribute the total exposure.
    """
    relevance = np.asarray(relevance, dtype=float)
    groups = np.asarray(groups, dtype=int)
    gamma = np.asarray(gamma, dtype=float)
    if not (relevance.shape == groups.shape == gamma.shape):
        raise DimensionError("relevance, groups and gamma must have the same length")
    g = int(groups.max()) + 1
    total = gamma.sum()
    if policy == "merit":
        mass = relevance.sum()
        if mass <= 0:
            raise ZeroRelevance("merit targets need some positive relevance")
        return np.bincount(groups, weights=relevance, minlength=g) / mass * total
    if policy == "size-proportional":
        return np.bincount(groups, minlength=g) / groups.size * total
    if policy == "explicit":
        if values is None:
            raise InvalidInstance("explicit policy needs target values")
        values = np.asarray(values, dtype=float)
        if values.shape != (g,):
            raise DimensionError(f"expected {g} target values, got {values.shape}")
        if abs(values.sum() - total) > 1e-9 * max(1.0, total):
            raise InvalidInstance("explicit targets must sum to the total exposure")
        return values.copy()
    raise InvalidInstance(f"unknown target policy {policy!r}")


@dataclass(frozen=True, eq=False)
class QueryInstance:
    """One query: relevance, group membership, position weights and group targets.

    Equality and hashing compare all fields by value.
    """

    query_id: str
    relevance: np.ndarray
    groups: np.ndarray
    gamma: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "relevance", _frozen(self.relevance))
        object.__setattr__(self, "groups", _frozen(self.groups, dtype=int))
        object.__setattr__(self, "gamma", _frozen(self.gamma))
        object.__setattr__(self, "target", _frozen(self.target))
        object.__setattr__(self, "query_id", str(self.query_id))
        self._check()

    def _check(self):
        n = self.relevance.size
        if self.relevance.ndim != 1 or self.groups.shape != (n,) or self.gamma.shape != (n,):
            raise DimensionError("relevance, groups and gamma must be 1-d of equal length")
        if n == 0:
            raise InvalidInstance("an instance needs at least one item")
        if self.groups.min() < 0:
            raise InvalidInstance("group ids must be non-negative")
        g = int(self.groups.max()) + 1
        if np.any(np.bincount(self.groups, minlength=g) == 0):
            raise InvalidInstance("every group id in 0..g-1 needs at least one item")
        if self.target.shape != (g,):
            raise DimensionError(f"target has shape {self.target.shape}, expected ({g},)")
        if np.any(self.gamma <= 0) or np.any(np.diff(self.gamma) >= 0):
            raise InvalidInstance("gamma must be positive and strictly decreasing")
        total = self.gamma.sum()
        if abs(self.target.sum() - total) > 1e-9 * max(1.0, total):
            raise InvalidInstance("targets must sum to the total exposure sum(gamma)")

    def _key(self) -> tuple:
        return (self.query_id, self.relevance.tobytes(), self.groups.tobytes(),
                self.gamma.tobytes(), self.target.tobytes())

    def __eq__(self, other):
        if not isinstance(other, QueryInstance):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @classmethod
    def create(cls, relevance, groups, gamma=None, policy="size-proportional", values=None,
               query_id="q0") -> "QueryInstance":
        """Build an instance from raw labels, defaulting to DCG position weights."""
        relevance = np.asarray(relevance, dtype=float)
        groups = canonical_groups(list(groups))
        gamma = dcg_exposure(relevance.size) if gamma is None else np.asarray(gamma, dtype=float)
        target = build_target_exposure(relevance, groups, gamma, policy, values)
        return cls(query_id, relevance, groups, gamma, target)

    @property
    def n(self) -> int:
        return self.relevance.size

    @property
    def n_groups(self) -> int:
        return self.target.size

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.n_groups)

    @property
    def G(self) -> np.ndarray:
        return group_matrix(self.groups, self.n_groups)

    @property
    def scale(self) -> float:
        """Magnitude used to scale geometric tolerances."""
        return max(1.0, float(np.abs(self.gamma).sum()))

    def to_dict(self) -> dict:
        return {
            "queryId": self.query_id,
            "relevance": self.relevance.tolist(),
            "groups": self.groups.tolist(),
            "gamma": self.gamma.tolist(),
            "target": {"values": self.target.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QueryInstance":
        target = d.get("target", {"policy": "size-proportional"})
        if isinstance(target, (list, tuple)):
            target = {"values": target}
        if "values" in target:
            policy, values = "explicit", target["values"]
        else:
            policy, values = target.get("policy", "size-proportional"), None
        return cls.create(d["relevance"], d["groups"], d.get("gamma"), policy, values,
                          query_id=d.get("queryId", "q0"))


def _check_dims(x: np.ndarray, n: int):
    if x.shape != (n,):
        raise DimensionError(f"expected a vector of length {n}, got shape {x.shape}")


def utility_of(x, relevance) -> float:
    """Expected utility ``x . rho``."""
    x = np.asarray(x, dtype=float)
    relevance = np.asarray(relevance, dtype=float)
    _check_dims(x, relevance.size)
    return float(x @ relevance)


def group_exposure(x, instance: QueryInstance) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_dims(x, instance.n)
    return np.bincount(instance.groups, weights=x, minlength=instance.n_groups)


def unfairness_of(x, instance: QueryInstance) -> float:
    """Euclidean distance between the group exposures of ``x`` and the targets."""
    return float(np.linalg.norm(group_exposure(x, instance) - instance.target))


@dataclass(frozen=True)
class Permutation:
    """A ranking; ``order[k]`` is the item shown at rank ``k`` (0-based)."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"not a permutation: {order}")
        object.__setattr__(self, "order", order)

    @classmethod
    def from_positions(cls, position_of: Sequence[int]) -> "Permutation":
        return cls(tuple(np.argsort(np.asarray(position_of), kind="stable")))

    @property
    def position_of(self) -> np.ndarray:
        pos = np.empty(len(self.order), dtype=int)
        pos[list(self.order)] = np.arange(len(self.order))
        return pos

    def exposure(self, gamma) -> np.ndarray:
        """Exposure vector of the items when this ranking is shown."""
        gamma = np.asarray(gamma, dtype=float)
        x = np.empty_like(gamma)
        x[list(self.order)] = gamma
        return x

    def matrix(self) -> np.ndarray:
        """Permutation matrix with ``P[item, rank] = 1``."""
        n = len(self.order)
        P = np.zeros((n, n))
        P[list(self.order), np.arange(n)] = 1.0
        return P

    def __len__(self):
        return len(self.order)


Atom = tuple  # (weight, Permutation)


@dataclass(frozen=True)
class RankingDistribution:
    """A finite distribution over rankings."""

    atoms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        atoms = tuple((float(w), p if isinstance(p, Permutation) else Permutation(p))
                      for w, p in self.atoms)
        if not atoms:
            raise EmptyDistribution("a distribution needs at least one atom")
        w = np.array([a[0] for a in atoms])
        if np.any(w < -1e-12):
            raise ValueError("atom weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12 * max(1, len(atoms)):
            raise ValueError(f"atom weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def normalized(cls, atoms: Iterable[Atom], drop_below: float = 1e-12) -> "RankingDistribution":
        """Drop negligible weights and rescale the rest onto the simplex."""
        atoms = [(float(w), p) for w, p in atoms if w > drop_below]
        if not atoms:
            raise EmptyDistribution("no atom above the weight threshold")
        total = sum(w for w, _ in atoms)
        return cls(tuple((w / total, p) for w, p in atoms))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms])

    @property
    def rankings(self) -> list:
        return [p for _, p in self.atoms]

    def __len__(self):
        return len(self.atoms)

    def to_dict(self) -> dict:
        return {"atoms": [{"weight": w, "ranking": list(p.order)} for w, p in self.atoms]}

    @classmethod
    def from_dict(cls, d: dict) -> "RankingDistribution":
        return cls(tuple((a["weight"], Permutation(a["ranking"])) for a in d["atoms"]))

