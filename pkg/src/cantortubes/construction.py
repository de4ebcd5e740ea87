"""Finite-depth realizations of the random Cantor sets E(M_n, N_n).

A realization stores, for every level k = 0..n, the chosen M-adic cubes as
integer lower-corner coordinates in units of r_k. Level 0 is the unit cube.
Cubes within a level are kept in canonical order: grouped by parent (in the
parent level's order) and, within a parent, by linear digit index.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _hashrng

FORMAT_VERSION = 1

UNIFORM_SUBSET = "UniformSubset"
COLUMN_LR = "ColumnLR"
DIAGONAL_LD = "DiagonalLD"
CUSTOM = "Custom"
RULE_KINDS = (UNIFORM_SUBSET, COLUMN_LR, DIAGONAL_LD, CUSTOM)

# sampler(M, N, d, rng) -> (N, d) array of distinct digit vectors
Sampler = Callable[[int, int, int, np.random.Generator], np.ndarray]


class InvalidParameters(ValueError):
    """Raised when a construction fails `validate_params`."""

    def __init__(self, report: "ValidationReport"):
        super().__init__(report.message)
        self.report = report


@dataclass(frozen=True)
class ConstructionParams:
    d: int
    levels: tuple[tuple[int, int], ...]
    M_bound: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple((int(m), int(n)) for m, n in self.levels))
        if self.M_bound is None and self.levels:
            object.__setattr__(self, "M_bound", max(m for m, _ in self.levels))

    @classmethod
    def constant(cls, d: int, M: int, N: int, depth: int, M_bound: int | None = None):
        return cls(d, ((M, N),) * depth, M_bound)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def truncated(self, depth: int) -> "ConstructionParams":
        return ConstructionParams(self.d, self.levels[:depth], self.M_bound)

    def scale(self, k: int) -> int:
        """Integer 1/r_k = M_1 * ... * M_k."""
        return math.prod(m for m, _ in self.levels[:k])

    def r(self, k: int) -> float:
        return 1.0 / self.scale(k)

    def r_exact(self, k: int) -> Fraction:
        return Fraction(1, self.scale(k))

    def P(self, k: int) -> int:
        return math.prod(n for _, n in self.levels[:k])

    def to_dict(self) -> dict:
        return {"d": self.d, "levels": [list(lv) for lv in self.levels], "M_bound": self.M_bound}

    @classmethod
    def from_dict(cls, data: dict) -> "ConstructionParams":
        levels = [tuple(lv) for lv in data["levels"]]
        if "repeat" in data:
            levels = levels * int(data["repeat"])
        return cls(int(data["d"]), tuple(levels), data.get("M_bound"))


@dataclass(frozen=True)
class SelectionRule:
    kind: str = UNIFORM_SUBSET
    name: str | None = None
    sampler: Sampler | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SelectionRule":
        kind = data.get("kind", UNIFORM_SUBSET)
        if kind not in RULE_KINDS:
            raise ValueError(f"unknown selection rule kind {kind!r}")
        if kind == CUSTOM:
            return custom_rule(data["name"])
        return cls(kind)

    def resolved_sampler(self) -> Sampler | None:
        if self.sampler is not None:
            return self.sampler
        if self.name is not None:
            return _CUSTOM_SAMPLERS.get(self.name)
        return None


_CUSTOM_SAMPLERS: dict[str, Sampler] = {}


def register_rule(name: str, sampler: Sampler) -> SelectionRule:
    """Register a named custom sampler so realizations using it round-trip through JSON."""
    _CUSTOM_SAMPLERS[name] = sampler
    return SelectionRule(CUSTOM, name, sampler)


def custom_rule(name: str) -> SelectionRule:
    if name not in _CUSTOM_SAMPLERS:
        raise ValueError(f"no custom selection rule registered under {name!r}")
    return SelectionRule(CUSTOM, name, _CUSTOM_SAMPLERS[name])


def _left_column(M, N, d, rng):
    # deterministic: x-digit 0, all y-digits; used for the forced-column contrast
    return np.array([(0, j) for j in range(N)])


LEFT_COLUMN = register_rule("LeftColumn", _left_column)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = "ok"
    level: int | None = None

    def __bool__(self):
        return self.ok


def validate_params(p: ConstructionParams, rule: SelectionRule = SelectionRule()) -> ValidationReport:
    if p.d < 2:
        return ValidationReport(False, "ambient dimension must be >= 2")
    if rule.kind not in RULE_KINDS:
        return ValidationReport(False, f"unknown selection rule kind {rule.kind!r}")
    if rule.kind == CUSTOM and rule.resolved_sampler() is None:
        return ValidationReport(False, "custom rule without sampler")
    for k, (M, N) in enumerate(p.levels, start=1):
        if M < 2:
            return ValidationReport(False, "degenerate branching", k)
        if p.M_bound is not None and M > p.M_bound:
            return ValidationReport(False, "branching exceeds M bound", k)
        if N < 1:
            return ValidationReport(False, "empty level", k)
        if N > M**p.d:
            return ValidationReport(False, "overfull level", k)
        if rule.kind in (COLUMN_LR, DIAGONAL_LD) and (p.d, M, N) != (2, 2, 2):
            return ValidationReport(False, "rule/shape mismatch", k)
    return ValidationReport(True)


def _digit_grid(M: int, d: int) -> np.ndarray:
    """All digit vectors in {0..M-1}^d ordered by linear index sum a_i M^i."""
    idx = np.arange(M**d)
    return np.stack([(idx // M**i) % M for i in range(d)], axis=1)


_COLUMN_PAIRS = np.array([[[0, 0], [0, 1]], [[1, 0], [1, 1]]])
_DIAGONAL_PAIRS = np.array([[[0, 0], [1, 1]], [[1, 0], [0, 1]]])


def _select_digits(rule: SelectionRule, M: int, N: int, d: int, keys: np.ndarray) -> np.ndarray:
    """Digits of the chosen children, shape (K, N, d), one row per parent key."""
    K = keys.shape[0]
    if rule.kind == UNIFORM_SUBSET:
        total = M**d
        if N == total:
            return np.broadcast_to(_digit_grid(M, d), (K, total, d)).copy()
        # sequential draws without replacement (partial Fisher-Yates)
        u = _hashrng.uniforms(keys, N)
        perm = np.broadcast_to(np.arange(total), (K, total)).copy()
        rows = np.arange(K)
        for i in range(N):
            j = i + np.minimum((u[:, i] * (total - i)).astype(np.int64), total - i - 1)
            a, b = perm[rows, i].copy(), perm[rows, j].copy()
            perm[rows, i], perm[rows, j] = b, a
        return _digit_grid(M, d)[perm[:, :N]]
    if rule.kind in (COLUMN_LR, DIAGONAL_LD):
        pairs = _COLUMN_PAIRS if rule.kind == COLUMN_LR else _DIAGONAL_PAIRS
        u = _hashrng.uniforms(keys, 1)[:, 0]
        return pairs[(u >= 0.5).astype(np.int64)]
    sampler = rule.resolved_sampler()
    out = np.empty((K, N, d), dtype=np.int64)
    for i, key in enumerate(keys):
        out[i] = np.asarray(sampler(M, N, d, np.random.default_rng(int(key))), dtype=np.int64)
    return out


def extend_level(
    params: ConstructionParams,
    rule: SelectionRule,
    level: int,
    parents: np.ndarray,
    seeds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Choose level-`level` children inside every parent cube.

    `parents` holds level-(level-1) integer coordinates (K, d) and `seeds`
    the per-row realization seed (K,). Returns child coordinates (K*N, d),
    grouped by parent and sorted by digit inside each group, and the parent
    row index of each child.
    """
    M, N = params.levels[level - 1]
    d = params.d
    keys = _hashrng.hash_keys(seeds, level, parents)
    digits = _select_digits(rule, M, N, d, keys)
    lin = (digits * (M ** np.arange(d))).sum(axis=2)
    order = np.argsort(lin, axis=1, kind="stable")
    digits = np.take_along_axis(digits, order[:, :, None], axis=1)
    children = parents[:, None, :] * M + digits
    parent_row = np.repeat(np.arange(parents.shape[0]), N)
    return children.reshape(-1, d), parent_row


def sample_levels(
    params: ConstructionParams,
    rule: SelectionRule,
    seeds: np.ndarray,
    depth: int,
    start_level: int = 0,
    start: np.ndarray | None = None,
    start_trial: np.ndarray | None = None,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Grow a batch of independent realizations level by level.

    Yields (level, coords, trial) for level = start_level+1 .. depth, where
    `trial` maps every cube to its index in `seeds`. Starting from a shared
    prefix (the cubes `start` at `start_level`) gives draws conditioned on it.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    if start is None:
        coords = np.zeros((seeds.shape[0], params.d), dtype=np.int64)
        trial = np.arange(seeds.shape[0])
    else:
        start = np.asarray(start, dtype=np.int64)
        if start_trial is None:
            trial = np.repeat(np.arange(seeds.shape[0]), start.shape[0])
            coords = np.tile(start, (seeds.shape[0], 1))
        else:
            trial, coords = np.asarray(start_trial), start
    for level in range(start_level + 1, depth + 1):
        coords, parent_row = extend_level(params, rule, level, coords, seeds[trial])
        trial = trial[parent_row]
        yield level, coords, trial


@dataclass(frozen=True)
class CubeAddress:
    """Per-level digit vectors a_1..a_level of an M-adic cube."""

    digits: tuple[tuple[int, ...], ...]

    @property
    def level(self) -> int:
        return len(self.digits)

    def parent(self) -> "CubeAddress":
        if not self.digits:
            raise ValueError("the unit cube has no parent")
        return CubeAddress(self.digits[:-1])

    def coords(self, params: ConstructionParams) -> tuple[int, ...]:
        c = [0] * params.d
        for k, a in enumerate(self.digits):
            M = params.levels[k][0]
            c = [ci * M + ai for ci, ai in zip(c, a)]
        return tuple(c)

    def lower_corner(self, params: ConstructionParams) -> tuple[Fraction, ...]:
        r = params.r_exact(self.level)
        return tuple(ci * r for ci in self.coords(params))

    def side(self, params: ConstructionParams) -> Fraction:
        return params.r_exact(self.level)

    @classmethod
    def from_coords(cls, params: ConstructionParams, level: int, coords: Sequence[int]) -> "CubeAddress":
        c = [int(x) for x in coords]
        digits = []
        for k in range(level, 0, -1):
            M = params.levels[k - 1][0]
            digits.append(tuple(x % M for x in c))
            c = [x // M for x in c]
        if any(c):
            raise ValueError("coordinates outside the unit cube")
        return cls(tuple(reversed(digits)))


@dataclass(frozen=True, eq=False)
class Realization:
    params: ConstructionParams
    rule: SelectionRule
    seed: int
    levels: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def cubes(self, k: int | None = None) -> np.ndarray:
        """Integer lower corners (in units of r_k) of the chosen level-k cubes."""
        return self.levels[self.depth if k is None else k]

    def lower_corners(self, k: int | None = None) -> np.ndarray:
        k = self.depth if k is None else k
        return self.levels[k] * self.params.r(k)

    def contains(self, address: CubeAddress) -> bool:
        if address.level > self.depth:
            raise ValueError("undefined at this depth")
        target = np.array(address.coords(self.params), dtype=np.int64)
        return bool(np.any(np.all(self.levels[address.level] == target, axis=1)))

    def addresses(self, k: int) -> list[CubeAddress]:
        return [CubeAddress.from_coords(self.params, k, c) for c in self.levels[k]]

    def __eq__(self, other):
        if not isinstance(other, Realization):
            return NotImplemented
        return (
            self.params == other.params
            and self.rule == other.rule
            and self.seed == other.seed
            and len(self.levels) == len(other.levels)
            and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels))
        )

    __hash__ = None

    def to_dict(self) -> dict:
        levels = []
        for k in range(1, self.depth + 1):
            M = self.params.levels[k - 1][0]
            levels.append([list(map(int, row)) for row in self.levels[k] % M])
        return {
            "format_version": FORMAT_VERSION,
            "params": self.params.to_dict(),
            "rule": self.rule.to_dict(),
            "seed": int(self.seed),
            "levels": levels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Realization":
        params = ConstructionParams.from_dict(data["params"])
        rule = SelectionRule.from_dict(data["rule"])
        levels = [np.zeros((1, params.d), dtype=np.int64)]
        for k, digits in enumerate(data["levels"], start=1):
            M, N = params.levels[k - 1]
            digits = np.asarray(digits, dtype=np.int64).reshape(-1, params.d)
            if digits.shape[0] != levels[-1].shape[0] * N:
                raise ValueError(f"level {k}: expected {levels[-1].shape[0] * N} cubes")
            parents = np.repeat(levels[-1], N, axis=0)
            levels.append(parents * M + digits)
        return _freeze(params, rule, int(data["seed"]), levels)

    @classmethod
    def from_json(cls, text: str) -> "Realization":
        return cls.from_dict(json.loads(text))


def _freeze(params, rule, seed, levels) -> Realization:
    for arr in levels:
        arr.flags.writeable = False
    return Realization(params, rule, seed, tuple(levels))


def build_realization(p: ConstructionParams, rule: SelectionRule, seed: int) -> Realization:
    report = validate_params(p, rule)
    if not report:
        raise InvalidParameters(report)
    seeds = np.array([int(seed) & _hashrng._MASK64], dtype=np.uint64)
    levels = [np.zeros((1, p.d), dtype=np.int64)]
    for _, coords, _ in sample_levels(p, rule, seeds, p.depth):
        levels.append(coords)
    return _freeze(p, rule, int(seed), levels)


def with_prefix(prefix: Realization, params: ConstructionParams, extra: Sequence[np.ndarray]) -> Realization:
    """Realization whose first levels are `prefix` followed by `extra` level arrays."""
    levels = list(prefix.levels) + [np.array(e, dtype=np.int64) for e in extra]
    return _freeze(params, prefix.rule, prefix.seed, levels)


def dimension_value(p: ConstructionParams, period: int | None = None) -> float:
    """liminf of log P_n / -log r_n for the levels extended periodically.

    The last `period` levels (all of them by default) repeat forever; every
    residue class then converges to the same ratio over one period.
    """
    if p.depth == 0:
        raise ValueError("no levels")
    period = p.depth if period is None else period
    if not 1 <= period <= p.depth:
        raise ValueError("period must be between 1 and the number of levels")
    tail = p.levels[-period:]
    num = sum(math.log(n) for _, n in tail)
    den = sum(math.log(m) for m, _ in tail)
    return min(max(num / den, 0.0), float(p.d))
