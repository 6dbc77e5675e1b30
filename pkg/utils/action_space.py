"""Per-BS joint actions: enumeration, encoding, sampling and counting.

An action assigns each uplink and downlink subcarrier either to nobody or to
one user, with a power level in 1..N_a on every assigned subcarrier and the
levels of a link summing to at most N_a. Actions are ordered
lexicographically over (downlink owners, uplink owners, downlink levels,
uplink levels), idle sorting first, so id 0 is the all-idle action.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, product
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.special import comb

from config import Config
from utils.errors import CatalogOverflowError, InfeasibleAllocationError
from utils.net_model import Allocation, NetworkScenario, rates_over_actions

logger = logging.getLogger(__name__)

IDLE = -1


@dataclass(frozen=True)
class ActionDims:
    n_users: int
    n_ul: int
    n_dl: int
    n_levels: int

    @classmethod
    def of(cls, s: NetworkScenario) -> "ActionDims":
        return cls(s.n_users, s.n_ul_subcarriers, s.n_dl_subcarriers, s.n_power_levels)


@dataclass(frozen=True)
class ActionPattern:
    """Owner (IDLE or user) and power level of every subcarrier of both links"""

    dl_owner: tuple[int, ...]
    ul_owner: tuple[int, ...]
    dl_level: tuple[int, ...]
    ul_level: tuple[int, ...]

    def key(self) -> tuple:
        return (self.dl_owner, self.ul_owner, self.dl_level, self.ul_level)

    def to_allocation(self, s: NetworkScenario) -> Allocation:
        users = np.arange(s.n_users)[:, None]
        u = (np.asarray(self.ul_owner, dtype=int)[None, :] == users).astype(np.int8)
        d = (np.asarray(self.dl_owner, dtype=int)[None, :] == users).astype(np.int8)
        v = u * np.asarray(self.ul_level, dtype=float)[None, :] * s.ul_power_step
        w = d * np.asarray(self.dl_level, dtype=float)[None, :] * s.dl_power_step
        return Allocation(u=u, v=v, d=d, w=w)

    @classmethod
    def from_allocation(cls, alloc: Allocation, s: NetworkScenario) -> "ActionPattern":
        problems = alloc.violations(s.p_max_ul_w, s.p_max_dl_w)
        if problems:
            raise InfeasibleAllocationError("; ".join(problems))

        def link(ind, power, step):
            owner = np.where(ind.any(axis=0), np.argmax(ind, axis=0), IDLE)
            level = np.rint(power.sum(axis=0) / step).astype(int)
            if not np.allclose(level * step, power.sum(axis=0)) or np.any((owner != IDLE) & (level < 1)):
                raise InfeasibleAllocationError("powers are not on the quantised level grid")
            return tuple(int(x) for x in owner), tuple(int(x) for x in level)

        dl_owner, dl_level = link(alloc.d, alloc.w, s.dl_power_step)
        ul_owner, ul_level = link(alloc.u, alloc.v, s.ul_power_step)
        return cls(dl_owner, ul_owner, dl_level, ul_level)


@lru_cache(maxsize=None)
def level_tuples(k: int, n_levels: int) -> tuple[tuple[int, ...], ...]:
    """Positive k-tuples with sum <= n_levels, lexicographic"""
    if k == 0:
        return ((),)
    return tuple(
        (first,) + rest
        for first in range(1, n_levels - k + 2)
        for rest in level_tuples(k - 1, n_levels - first)
    )


def _full_levels(owner: tuple[int, ...], levels: tuple[int, ...]) -> tuple[int, ...]:
    it = iter(levels)
    return tuple(next(it) if o != IDLE else 0 for o in owner)


def link_pattern_count(n_users: int, n_sub: int, n_levels: int) -> int:
    """sum_k C(K, k) M^k C(N_a, k)"""
    return sum(
        comb(n_sub, k, exact=True) * n_users**k * comb(n_levels, k, exact=True) for k in range(n_sub + 1)
    )


def catalog_size(dims: ActionDims) -> int:
    return link_pattern_count(dims.n_users, dims.n_dl, dims.n_levels) * link_pattern_count(
        dims.n_users, dims.n_ul, dims.n_levels
    )


def owner_count(n_users: int, n_sub: int, max_owned: int) -> int:
    """Owner tuples of one link with at most max_owned subcarriers assigned"""
    return sum(comb(n_sub, k, exact=True) * n_users**k for k in range(min(n_sub, max_owned) + 1))


def iter_patterns(dims: ActionDims) -> Iterator[ActionPattern]:
    """Every feasible action in catalog order, generated lazily"""
    owners = range(IDLE, dims.n_users)

    def levels_for(owner):
        k = sum(o != IDLE for o in owner)
        return [_full_levels(owner, t) for t in level_tuples(k, dims.n_levels)]

    for do in product(owners, repeat=dims.n_dl):
        dl_levels = levels_for(do)
        if not dl_levels:
            continue
        for uo in product(owners, repeat=dims.n_ul):
            ul_levels = levels_for(uo)
            for dlev in dl_levels:
                for ulev in ul_levels:
                    yield ActionPattern(do, uo, dlev, ulev)


def _to_code(digits: Sequence[int], radix: int) -> int:
    code = 0
    for digit in digits:
        code = code * radix + digit
    return code


def _from_code(code: int, radix: int, n_digits: int) -> list[int]:
    digits = []
    for _ in range(n_digits):
        code, digit = divmod(code, radix)
        digits.append(digit)
    if code:
        raise IndexError("action code out of range")
    digits.reverse()
    return digits


def _uniform_levels(rng: np.random.Generator, k: int, n_levels: int) -> list[int]:
    # partial sums of a positive k-tuple with sum <= N are k distinct values in 1..N
    cuts = np.sort(rng.choice(np.arange(1, n_levels + 1), size=k, replace=False))
    return np.diff(np.concatenate(([0], cuts))).tolist()


def _uniform_level_vector(rng: np.random.Generator, n_sub: int, n_levels: int) -> tuple[int, ...]:
    """Non-negative n_sub-tuple with sum <= n_levels, uniform (stars and bars)"""
    if n_sub == 0:
        return ()
    bars = np.sort(rng.choice(n_levels + n_sub, size=n_sub, replace=False))
    return tuple(int(x) for x in np.diff(np.concatenate(([-1], bars))) - 1)


def _draw_owners(rng: np.random.Generator, n_users: int, n_sub: int, weights: np.ndarray) -> tuple[list, np.ndarray]:
    """Owner tuple whose assigned count k is drawn with the given weights"""
    k = int(rng.choice(len(weights), p=weights / weights.sum()))
    chosen = np.sort(rng.choice(n_sub, size=k, replace=False)) if k else np.array([], dtype=int)
    owners = [IDLE] * n_sub
    users = rng.integers(0, n_users, size=k)
    for pos, user in zip(chosen.tolist(), users.tolist()):
        owners[pos] = int(user)
    return owners, chosen


def _sample_link(rng: np.random.Generator, n_users: int, n_sub: int, n_levels: int) -> tuple[tuple, tuple]:
    """Uniform draw over (owner, level) patterns of one link"""
    weights = np.array(
        [comb(n_sub, k, exact=True) * n_users**k * comb(n_levels, k, exact=True) for k in range(n_sub + 1)],
        dtype=float,
    )
    owners, chosen = _draw_owners(rng, n_users, n_sub, weights)
    levels = [0] * n_sub
    lv = _uniform_levels(rng, len(chosen), n_levels) if len(chosen) else []
    for pos, level in zip(chosen.tolist(), lv):
        levels[pos] = int(level)
    return tuple(owners), tuple(levels)


class ActionSpace(ABC):
    """Id-indexed action set of one BS as seen by a learner"""

    def __init__(self, dims: ActionDims):
        self.dims = dims

    @property
    @abstractmethod
    def size(self) -> int: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> int:
        """Uniform random id"""

    @abstractmethod
    def realize(self, action_id: int, rng: np.random.Generator) -> ActionPattern:
        """Full action executed for an id; restricted spaces fill the free part at random"""

    def ids(self) -> Iterator[int]:
        return iter(range(self.size))

    def first_unvisited(self, visited) -> Optional[int]:
        for a in self.ids():
            if a not in visited:
                return a
        return None


class ActionCatalog(ActionSpace):
    """Materialised catalog with dense ids 0..|A|-1"""

    def __init__(self, dims: ActionDims, patterns: Sequence[ActionPattern]):
        super().__init__(dims)
        self.patterns = list(patterns)
        n = len(self.patterns)
        self.dl_owner = np.array([p.dl_owner for p in self.patterns], dtype=np.int16).reshape(n, dims.n_dl)
        self.ul_owner = np.array([p.ul_owner for p in self.patterns], dtype=np.int16).reshape(n, dims.n_ul)
        self.dl_level = np.array([p.dl_level for p in self.patterns], dtype=np.int16).reshape(n, dims.n_dl)
        self.ul_level = np.array([p.ul_level for p in self.patterns], dtype=np.int16).reshape(n, dims.n_ul)
        self._index = None

    @property
    def size(self) -> int:
        return len(self.patterns)

    @property
    def counts(self) -> tuple[int, int, int]:
        """(subcarrier patterns, power patterns, total)"""
        d = self.dims
        owners = sum(comb(d.n_dl, k, exact=True) * d.n_users**k for k in range(d.n_dl + 1)) * sum(
            comb(d.n_ul, k, exact=True) * d.n_users**k for k in range(d.n_ul + 1)
        )
        powers = sum(comb(d.n_dl, k, exact=True) * comb(d.n_levels, k, exact=True) for k in range(d.n_dl + 1)) * sum(
            comb(d.n_ul, k, exact=True) * comb(d.n_levels, k, exact=True) for k in range(d.n_ul + 1)
        )
        return owners, powers, self.size

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(0, self.size))

    def realize(self, action_id: int, rng: Optional[np.random.Generator] = None) -> ActionPattern:
        return self.decode(action_id)

    def decode(self, action_id: int) -> ActionPattern:
        if not 0 <= action_id < self.size:
            raise IndexError(f"action id {action_id} out of range [0, {self.size})")
        return self.patterns[action_id]

    def encode(self, pattern: ActionPattern) -> int:
        if self._index is None:
            self._index = {p.key(): a for a, p in enumerate(self.patterns)}
        try:
            return self._index[pattern.key()]
        except KeyError:
            raise InfeasibleAllocationError("pattern is not a feasible action of this catalog") from None

    def allocation(self, action_id: int, s: NetworkScenario) -> Allocation:
        return self.decode(action_id).to_allocation(s)

    def served_users(self) -> np.ndarray:
        """(A, M) mask of users that receive any subcarrier"""
        users = np.arange(self.dims.n_users)
        return (self.dl_owner[:, :, None] == users).any(axis=1) | (self.ul_owner[:, :, None] == users).any(axis=1)


def enumerate_actions(s: NetworkScenario | ActionDims, n: int = 0, cap: int = Config.Harness.CATALOG_CAP) -> ActionCatalog:
    """Complete catalog of one BS. All BSs share dims, so n only labels errors."""
    dims = s if isinstance(s, ActionDims) else ActionDims.of(s)
    size = catalog_size(dims)
    if size > cap:
        raise CatalogOverflowError(
            f"BS {n}: catalog of {size} actions exceeds the cap of {cap}; "
            "reduce dims or use action_mode='sampled'"
        )
    return _build_catalog(dims)


@lru_cache(maxsize=8)
def _build_catalog(dims: ActionDims) -> ActionCatalog:
    catalog = ActionCatalog(dims, iter_patterns(dims))
    logger.debug(f"Built catalog of {catalog.size} actions for {dims}")
    return catalog


class SampledActionSpace(ActionSpace):
    """Unmaterialised full action space. Ids are mixed-radix codes that sort
    in catalog order, so they are sparse but comparable with catalog ids."""

    def __init__(self, dims: ActionDims):
        super().__init__(dims)
        d = dims
        self._radices = [d.n_users + 1] * (d.n_dl + d.n_ul) + [d.n_levels + 1] * (d.n_dl + d.n_ul)
        self._size = catalog_size(dims)

    @property
    def size(self) -> int:
        return self._size

    def encode(self, pattern: ActionPattern) -> int:
        digits = [o + 1 for o in pattern.dl_owner + pattern.ul_owner] + list(pattern.dl_level + pattern.ul_level)
        code = 0
        for digit, radix in zip(digits, self._radices):
            code = code * radix + digit
        return code

    def decode(self, code: int) -> ActionPattern:
        digits = []
        for radix in reversed(self._radices):
            code, digit = divmod(code, radix)
            digits.append(digit)
        if code:
            raise IndexError("action code out of range")
        digits.reverse()
        d = self.dims
        owners = [x - 1 for x in digits[: d.n_dl + d.n_ul]]
        levels = digits[d.n_dl + d.n_ul:]
        pattern = ActionPattern(
            tuple(owners[: d.n_dl]), tuple(owners[d.n_dl:]), tuple(levels[: d.n_dl]), tuple(levels[d.n_dl:])
        )
        for owner, level in ((pattern.dl_owner, pattern.dl_level), (pattern.ul_owner, pattern.ul_level)):
            if any((o == IDLE) != (lv == 0) for o, lv in zip(owner, level)) or sum(level) > d.n_levels:
                raise InfeasibleAllocationError("action code does not describe a feasible action")
        return pattern

    def sample(self, rng: np.random.Generator) -> int:
        d = self.dims
        dl_owner, dl_level = _sample_link(rng, d.n_users, d.n_dl, d.n_levels)
        ul_owner, ul_level = _sample_link(rng, d.n_users, d.n_ul, d.n_levels)
        return self.encode(ActionPattern(dl_owner, ul_owner, dl_level, ul_level))

    def realize(self, action_id: int, rng: Optional[np.random.Generator] = None) -> ActionPattern:
        return self.decode(action_id)

    def ids(self) -> Iterator[int]:
        return (self.encode(p) for p in iter_patterns(self.dims))


class OwnerPatternSpace(ActionSpace):
    """Learns which user holds each subcarrier; power levels are drawn at random.

    Ids are base-(M+1) codes over the owners of both links, idle first. A
    link can own at most N_a subcarriers since each needs a level of 1.
    """

    def __init__(self, dims: ActionDims):
        super().__init__(dims)
        self._radix = dims.n_users + 1
        self._size = owner_count(dims.n_users, dims.n_dl, dims.n_levels) * owner_count(
            dims.n_users, dims.n_ul, dims.n_levels
        )

    @property
    def size(self) -> int:
        return self._size

    def _feasible(self, owner: tuple[int, ...]) -> bool:
        return sum(o != IDLE for o in owner) <= self.dims.n_levels

    def encode(self, dl_owner: tuple[int, ...], ul_owner: tuple[int, ...]) -> int:
        return _to_code([o + 1 for o in dl_owner + ul_owner], self._radix)

    def decode(self, code: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        d = self.dims
        owners = [x - 1 for x in _from_code(code, self._radix, d.n_dl + d.n_ul)]
        do, uo = tuple(owners[: d.n_dl]), tuple(owners[d.n_dl:])
        if not (self._feasible(do) and self._feasible(uo)):
            raise InfeasibleAllocationError("owner code assigns more subcarriers than there are power levels")
        return do, uo

    def ids(self) -> Iterator[int]:
        users = range(IDLE, self.dims.n_users)
        for do in product(users, repeat=self.dims.n_dl):
            if not self._feasible(do):
                continue
            for uo in product(users, repeat=self.dims.n_ul):
                if self._feasible(uo):
                    yield self.encode(do, uo)

    def sample(self, rng: np.random.Generator) -> int:
        d = self.dims

        def link(n_sub):
            weights = np.array(
                [comb(n_sub, k, exact=True) * d.n_users**k for k in range(min(n_sub, d.n_levels) + 1)], dtype=float
            )
            return tuple(_draw_owners(rng, d.n_users, n_sub, weights)[0])

        return self.encode(link(d.n_dl), link(d.n_ul))

    def realize(self, action_id: int, rng: np.random.Generator) -> ActionPattern:
        do, uo = self.decode(action_id)

        def levels(owner):
            k = sum(o != IDLE for o in owner)
            return _full_levels(owner, tuple(_uniform_levels(rng, k, self.dims.n_levels)) if k else ())

        return ActionPattern(do, uo, levels(do), levels(uo))


class LevelPatternSpace(ActionSpace):
    """Learns power levels per subcarrier (0 = unused); owners are drawn at random.

    Ids are base-(N_a+1) codes over the levels of both links.
    """

    def __init__(self, dims: ActionDims):
        super().__init__(dims)
        self._radix = dims.n_levels + 1
        self._size = comb(dims.n_levels + dims.n_dl, dims.n_dl, exact=True) * comb(
            dims.n_levels + dims.n_ul, dims.n_ul, exact=True
        )

    @property
    def size(self) -> int:
        return self._size

    def encode(self, dl_level: tuple[int, ...], ul_level: tuple[int, ...]) -> int:
        return _to_code(dl_level + ul_level, self._radix)

    def decode(self, code: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        d = self.dims
        levels = _from_code(code, self._radix, d.n_dl + d.n_ul)
        dlev, ulev = tuple(levels[: d.n_dl]), tuple(levels[d.n_dl:])
        if sum(dlev) > d.n_levels or sum(ulev) > d.n_levels:
            raise InfeasibleAllocationError("level code exceeds the power budget of a link")
        return dlev, ulev

    def ids(self) -> Iterator[int]:
        d = self.dims
        levels = range(d.n_levels + 1)
        for dlev in product(levels, repeat=d.n_dl):
            if sum(dlev) > d.n_levels:
                continue
            for ulev in product(levels, repeat=d.n_ul):
                if sum(ulev) <= d.n_levels:
                    yield self.encode(dlev, ulev)

    def sample(self, rng: np.random.Generator) -> int:
        d = self.dims
        return self.encode(_uniform_level_vector(rng, d.n_dl, d.n_levels), _uniform_level_vector(rng, d.n_ul, d.n_levels))

    def realize(self, action_id: int, rng: np.random.Generator) -> ActionPattern:
        dlev, ulev = self.decode(action_id)

        def owners(levels):
            drawn = rng.integers(0, self.dims.n_users, size=len(levels)).tolist()
            return tuple(int(u) if lv > 0 else IDLE for u, lv in zip(drawn, levels))

        return ActionPattern(owners(dlev), owners(ulev), dlev, ulev)


def build_action_space(dims: ActionDims, mode: str = "auto", cap: int = Config.Harness.CATALOG_CAP) -> ActionSpace:
    if mode == "exact" or (mode == "auto" and catalog_size(dims) <= cap):
        return enumerate_actions(dims, cap=cap)
    if mode in ("auto", "sampled"):
        return SampledActionSpace(dims)
    raise ValueError(f"unknown action mode '{mode}'")


class BsRates:
    """Per-user rates of the actions of one BS under the single-association rule.

    Every served user has exclusive subcarriers at its only BS, so neither
    link sees interference and the rates of an action depend on that BS alone.
    Full catalogs are tabulated once; other spaces are evaluated per call.
    """

    def __init__(self, s: NetworkScenario, n: int, space: ActionSpace):
        self.s, self.n, self.space = s, n, space
        self._table = None
        if isinstance(space, ActionCatalog):
            self._table = self._rates(space.dl_owner, space.ul_owner, space.dl_level, space.ul_level)
            self._served = space.served_users()

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """(ul, dl) of shape (A, M); full catalogs only"""
        if self._table is None:
            raise TypeError("rates are only tabulated for a full catalog")
        return self._table

    def _rates(self, dl_owner, ul_owner, dl_level, ul_level) -> tuple[np.ndarray, np.ndarray]:
        s = self.s
        users = np.arange(s.n_users)[None, :, None]
        u = (ul_owner[:, None, :] == users).astype(float)
        d = (dl_owner[:, None, :] == users).astype(float)
        v = u * ul_level[:, None, :] * s.ul_power_step
        w = d * dl_level[:, None, :] * s.dl_power_step
        ul = rates_over_actions(s.ul_gain[self.n], u, v, s.bandwidth_hz, s.noise_power_w)
        dl = rates_over_actions(s.dl_gain[self.n], d, w, s.bandwidth_hz, s.noise_power_w)
        return ul, dl

    def pattern_rates(self, p: ActionPattern) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        arrays = [np.asarray([x], dtype=np.int16) for x in p.key()]
        ul, dl = self._rates(*arrays)
        users = np.arange(self.s.n_users)
        served = np.isin(users, p.dl_owner) | np.isin(users, p.ul_owner)
        return ul[0], dl[0], served

    def lookup(self, action_id: int, pattern: ActionPattern) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ul, dl, served) per user for an executed action"""
        if self._table is not None:
            return self._table[0][action_id], self._table[1][action_id], self._served[action_id]
        return self.pattern_rates(pattern)


def joint_user_rates(
    ul: np.ndarray, dl: np.ndarray, served: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Resolve (..., N, M) per-BS rates to each user's serving BS (lowest index wins)"""
    any_served = served.any(axis=-2)
    owner = np.where(any_served, np.argmax(served, axis=-2), -1)
    safe = np.expand_dims(np.maximum(owner, 0), axis=-2)
    ul_m = np.where(any_served, np.take_along_axis(ul, safe, axis=-2).squeeze(-2), 0.0)
    dl_m = np.where(any_served, np.take_along_axis(dl, safe, axis=-2).squeeze(-2), 0.0)
    return ul_m, dl_m, owner


# --- counting ---------------------------------------------------------------

def _assignments(total: int, counts: Sequence[int]) -> int:
    """Ways to hand disjoint subsets of sizes counts[0], counts[1], ... out of `total`"""
    ways, used = 1, 0
    for c in counts:
        ways *= comb(total - used, c, exact=True)
        used += c
    return ways


def _link_count(total: int, counts: Sequence[int], n_levels: int, power_model: str) -> int:
    k = sum(counts)
    if k > total:
        return 0
    if power_model == "canonical":
        power = comb(n_levels, k, exact=True)
    elif power_model == "verbatim":
        power = n_levels**total
    else:
        raise ValueError(f"unknown power model '{power_model}'")
    return _assignments(total, counts) * power


def theorem3_count(
    dims: ActionDims,
    dl_counts: Sequence[int],
    ul_counts: Sequence[int],
    power_model: str = "canonical",
    mu_factor: bool = False,
    n_collaborative: int = 0,
) -> int:
    """Number of actions whose users hold exactly the given subcarrier counts.

    power_model "canonical" counts level vectors with sum <= N_a, which
    matches enumeration; "verbatim" uses N_a^K per link. mu_factor adds
    the M^(collaborative users) term.
    """
    if len(dl_counts) != dims.n_users or len(ul_counts) != dims.n_users:
        raise ValueError("need one subcarrier count per user on each link")
    if any(c < 0 for c in list(dl_counts) + list(ul_counts)):
        raise ValueError("subcarrier counts must be non-negative")
    count = _link_count(dims.n_dl, dl_counts, dims.n_levels, power_model) * _link_count(
        dims.n_ul, ul_counts, dims.n_levels, power_model
    )
    if mu_factor:
        count *= dims.n_users**n_collaborative
    return count


def _count_vectors(n_users: int, total: int) -> Iterator[tuple[int, ...]]:
    """Every per-user count vector with sum <= total"""
    for k in range(total + 1):
        # multisets of k user slots map one-to-one to count vectors with sum k
        for slots in combinations_with_replacement(range(n_users), k):
            yield tuple(slots.count(m) for m in range(n_users))


def theorem3_total(
    dims: ActionDims, power_model: str = "canonical", mu_factor: bool = False, n_collaborative: int = 0
) -> int:
    """Sum of theorem3_count over every pair of count vectors"""
    dl = sum(_link_count(dims.n_dl, c, dims.n_levels, power_model) for c in _count_vectors(dims.n_users, dims.n_dl))
    ul = sum(_link_count(dims.n_ul, c, dims.n_levels, power_model) for c in _count_vectors(dims.n_users, dims.n_ul))
    total = dl * ul
    if mu_factor:
        total *= dims.n_users**n_collaborative
    return total


def worst_case_probability(catalog_sizes: Sequence[int], epsilon: float) -> float:
    """prod_n (1 - eps/|A_n|)^(|A_n| - 1)"""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    log_p = 0.0
    for size in catalog_sizes:
        if size < 1:
            raise ValueError("catalog sizes must be positive")
        log_p += (size - 1) * math.log1p(-epsilon / size)
    return math.exp(log_p)
