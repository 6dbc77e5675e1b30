"""Closed-form delay gains when a user receives more subcarriers or more
transmit power, and the ordering of those gains across task types.

Subcarrier gains use the flat-rate reading: every subcarrier of the link
carries the same rate r = R/c, where c is the number of subcarriers the user
holds. They are exact only when that holds; gain_direct is the ground truth
otherwise.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from utils.errors import InfeasibleAllocationError
from utils.net_model import Allocation, GlobalAllocation, NetworkScenario, TaskType, dl_rate, ul_rate
from utils.task_model import collaborative_time_opt, edge_time, local_time

logger = logging.getLogger(__name__)

# ratio between added and held subcarriers that selects an asymptotic branch
REGIME_FACTOR = 10.0


class Knob(str, Enum):
    DL_SUBCARRIERS = "dl_subcarriers"
    UL_SUBCARRIERS = "ul_subcarriers"
    DL_POWER = "dl_power"
    UL_POWER = "ul_power"

    @property
    def uplink(self) -> bool:
        return self in (Knob.UL_SUBCARRIERS, Knob.UL_POWER)

    @property
    def subcarriers(self) -> bool:
        return self in (Knob.DL_SUBCARRIERS, Knob.UL_SUBCARRIERS)


@dataclass(frozen=True, eq=False)
class GainQuery:
    """A change to one user's allocation at one BS.

    delta has one entry per subcarrier of the knob's link, in watts. For a
    subcarrier knob a positive entry adds that (currently free) subcarrier
    with the given power; for a power knob it raises the power on a
    subcarrier the user already holds.
    """

    user: int
    bs: int
    task_type: TaskType
    knob: Knob
    delta: np.ndarray

    def is_empty(self) -> bool:
        return not np.any(self.delta > 0)

    def added_count(self) -> int:
        return int(np.count_nonzero(self.delta > 0))

    def apply(self, s: NetworkScenario, g: GlobalAllocation) -> GlobalAllocation:
        if not 0 <= self.bs < s.n_bs or not 0 <= self.user < s.n_users:
            raise IndexError(f"bs={self.bs} or user={self.user} out of range")
        delta = np.asarray(self.delta, dtype=float)
        if np.any(delta < 0):
            raise InfeasibleAllocationError("delta must be non-negative")
        alloc = g.per_bs[self.bs]
        ind, power = (alloc.u, alloc.v) if self.knob.uplink else (alloc.d, alloc.w)
        if delta.shape != (ind.shape[1],):
            raise InfeasibleAllocationError(f"delta must have {ind.shape[1]} entries")
        ind, power = ind.copy(), power.copy()
        touched = delta > 0
        m = self.user
        if self.knob.subcarriers:
            if np.any(ind[:, touched]):
                raise InfeasibleAllocationError("added subcarriers must be free at the BS")
            ind[m, touched] = 1
            power[m, touched] = delta[touched]
        else:
            if np.any(ind[m, touched] == 0):
                raise InfeasibleAllocationError("power can only be added on subcarriers the user holds")
            power[m] = power[m] + delta
        if self.knob.uplink:
            new = Allocation(u=ind, v=power, d=alloc.d, w=alloc.w)
        else:
            new = Allocation(u=alloc.u, v=alloc.v, d=ind, w=power)
        per_bs = list(g.per_bs)
        per_bs[self.bs] = new
        after = GlobalAllocation(tuple(per_bs))
        after.validate(s)
        return after


@dataclass(frozen=True)
class GainEvaluation:
    value: float
    equation: str
    branch: str
    consistent: bool = True


def equation_label(task_type: TaskType, knob: Knob) -> str:
    return f"{task_type.name.lower()}/{knob.value}"


def is_null_pair(task_type: TaskType, knob: Knob) -> bool:
    """Edge tasks never use the uplink and local tasks never use the downlink"""
    return (task_type == TaskType.EDGE and knob.uplink) or (task_type == TaskType.LOCAL and not knob.uplink)


def user_delay(s: NetworkScenario, g: GlobalAllocation, n: int, m: int, task_type: TaskType) -> float:
    """Delay of user m served by BS n as if its task had the given type"""
    ul, dl = ul_rate(s, g, n, m), dl_rate(s, g, n, m)
    if task_type == TaskType.EDGE:
        return edge_time(s, m, dl)
    if task_type == TaskType.LOCAL:
        return local_time(s, m, ul)
    return collaborative_time_opt(s, m, ul, dl)


def gain_direct(s: NetworkScenario, g: GlobalAllocation, q: GainQuery) -> float:
    """Delay before the change minus delay after it"""
    if q.is_empty():
        return 0.0
    before = user_delay(s, g, q.bs, q.user, q.task_type)
    after = user_delay(s, q.apply(s, g), q.bs, q.user, q.task_type)
    if math.isinf(before) and math.isinf(after):
        return 0.0
    return before - after


def _offload_penalty(s: NetworkScenario, m: int, ul: float, dl: float) -> float:
    if ul <= 0 or dl <= 0:
        return math.inf
    f_m, big_f = s.user_cpu_hz[m], s.mec_cpu_hz
    return f_m * big_f / ul + f_m * s.result_ratio * big_f / dl


def collaborative_factor(s: NetworkScenario, m: int, y_before: float, y_after: float) -> float:
    """(w_m F)^2 / ((w_m F + Y)(w_m F + Y')), valid when w f_m << w_m F"""
    c = s.cycles_per_bit_user[m] * s.mec_cpu_hz
    return c * c / ((c + y_before) * (c + y_after))


def regime(added: int, held: int) -> str:
    if added >= REGIME_FACTOR * held:
        return "much_larger"
    if added * REGIME_FACTOR <= held:
        return "much_smaller"
    return "general"


def _subcarrier_shape(added: int, held: int, per_subcarrier_rate: float, branch: str) -> float:
    """Reduction of 1/R when a link grows from `held` to `held + added` flat subcarriers"""
    if branch == "much_larger":
        return 1.0 / (held * per_subcarrier_rate)
    if branch == "much_smaller":
        return added / (held * held * per_subcarrier_rate)
    return added / (held * (held + added) * per_subcarrier_rate)


def evaluate_gain(
    s: NetworkScenario, g: GlobalAllocation, q: GainQuery, printed_form: bool = False
) -> GainEvaluation:
    """Closed-form gain for q, with the branch that produced it.

    printed_form switches the collaborative uplink-subcarrier case to the
    version written in downlink symbols. It is reported with consistent=False.
    """
    label = equation_label(q.task_type, q.knob)
    if is_null_pair(q.task_type, q.knob):
        return GainEvaluation(0.0, label, "null")
    if q.is_empty():
        return GainEvaluation(0.0, label, "empty")

    m, n = q.user, q.bs
    lam, nu = s.task_bits[m], s.result_ratio
    ul, dl = ul_rate(s, g, n, m), dl_rate(s, g, n, m)
    collaborative = q.task_type == TaskType.COLLABORATIVE
    # nu scales the result link of edge/local tasks and the downlink of collaborative ones
    coef = nu if (not collaborative or not q.knob.uplink) else 1.0

    if q.knob.subcarriers:
        alloc = g.per_bs[n]
        ind = alloc.u if q.knob.uplink else alloc.d
        held = int(ind[m].sum())
        rate = ul if q.knob.uplink else dl
        added = q.added_count()
        if held == 0 or rate <= 0:
            return GainEvaluation(math.inf, label, "unserved")
        branch = regime(added, held)
        flat = rate / held
        value = coef * lam * _subcarrier_shape(added, held, flat, branch)
        if not collaborative:
            return GainEvaluation(value, label, branch)
        grown = (held + added) * flat
        new_ul, new_dl = (grown, dl) if q.knob.uplink else (ul, grown)
        factor = collaborative_factor(s, m, _offload_penalty(s, m, ul, dl), _offload_penalty(s, m, new_ul, new_dl))
        if printed_form and q.knob.uplink:
            held_dl = int(alloc.d[m].sum())
            if held_dl == 0 or dl <= 0:
                return GainEvaluation(math.inf, label + "/printed", branch, consistent=False)
            printed = nu * lam * _subcarrier_shape(added, held_dl, dl / held_dl, branch)
            return GainEvaluation(printed * factor, label + "/printed", branch, consistent=False)
        return GainEvaluation(value * factor, label, branch)

    after = q.apply(s, g)
    new_ul, new_dl = ul_rate(s, after, n, m), dl_rate(s, after, n, m)
    before_rate, after_rate = (ul, new_ul) if q.knob.uplink else (dl, new_dl)
    if before_rate <= 0:
        return GainEvaluation(math.inf, label, "unserved")
    value = coef * lam * (after_rate - before_rate) / (before_rate * after_rate)
    if collaborative:
        value *= collaborative_factor(s, m, _offload_penalty(s, m, ul, dl), _offload_penalty(s, m, new_ul, new_dl))
    return GainEvaluation(value, label, "single")


def gain_formula(s: NetworkScenario, g: GlobalAllocation, q: GainQuery) -> float:
    return evaluate_gain(s, g, q).value


def relative_error(formula: float, direct: float) -> float:
    if formula == direct:
        return 0.0
    if math.isinf(formula) or math.isinf(direct):
        return math.inf
    return abs(formula - direct) / max(abs(formula), abs(direct))


# strict orderings of the gain across task types, smallest first
ORDERINGS = {
    Knob.DL_SUBCARRIERS: (TaskType.LOCAL, TaskType.COLLABORATIVE, TaskType.EDGE),
    Knob.DL_POWER: (TaskType.LOCAL, TaskType.COLLABORATIVE, TaskType.EDGE),
    Knob.UL_SUBCARRIERS: (TaskType.EDGE, TaskType.COLLABORATIVE, TaskType.LOCAL),
    Knob.UL_POWER: (TaskType.EDGE, TaskType.COLLABORATIVE, TaskType.LOCAL),
}


@dataclass
class OrderingVerdict:
    knob: Knob
    gains: dict[TaskType, float]
    held: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def all_held(self) -> bool:
        return all(ok for _, ok in self.held)


def corollary1_check(
    s: NetworkScenario, g: GlobalAllocation, m: int, knob: Knob, delta: np.ndarray
) -> OrderingVerdict:
    """Evaluate the same change under every task type and test the strict ordering"""
    owner = g.serving_bs()[m]
    if owner < 0:
        raise InfeasibleAllocationError(f"user {m} is not served, gains are undefined")
    alloc = g.per_bs[owner]
    if alloc.u[m].sum() == 0 or alloc.d[m].sum() == 0:
        raise InfeasibleAllocationError(f"user {m} needs both links served to compare task types")
    gains = {
        t: gain_direct(s, g, GainQuery(user=m, bs=int(owner), task_type=t, knob=knob, delta=delta))
        for t in TaskType
    }
    verdict = OrderingVerdict(knob=knob, gains=gains)
    order = ORDERINGS[knob]
    for low, high in zip(order, order[1:]):
        verdict.held.append((f"{low.name.lower()} < {high.name.lower()}", gains[low] < gains[high]))
    return verdict
