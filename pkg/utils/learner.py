"""Multi-agent tabular Q-learning with the multi-stack novelty filter.

Each BS runs one Agent. All agents share the global delay report: the state
is (binned t_max, m_max, m*) and the reward is the normalised reduction of
t_max. While k < G*B an agent routes its experience to stack k mod G; a
(state, action) already in that stack triggers a re-selection and gates off
the Q-update.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import yaml

from utils.action_space import ActionPattern, ActionSpace, BsRates, joint_user_rates
from utils.errors import ConfigError
from utils.net_model import NetworkScenario
from utils.run_config import LearnerParams
from utils.task_model import DelayReport, MuPolicy, delays_from_rates, local_reference_delay

logger = logging.getLogger(__name__)


class EnvState(NamedTuple):
    t_max_bin: int
    m_max: int
    m_star: int


def discretize(t_max: float, reference: float, n_bins: int) -> int:
    """Uniform bins over [0, reference]; bin n_bins holds +inf"""
    if math.isinf(t_max):
        return n_bins
    return min(int(t_max / reference * n_bins), n_bins - 1)


def reward(
    s: NetworkScenario,
    report: DelayReport,
    reference: str = "cycles_over_cpu",
    floor: float = -1.0,
    scale: float = 1.0,
) -> float:
    """Normalised delay reduction against scale times the slowest local computation, clamped to [floor, 1]"""
    if math.isinf(report.max_delay):
        return floor
    ref = scale * local_reference_delay(s, reference)
    return max((ref - report.max_delay) / ref, floor)


class QTable:
    """Sparse Q(x, a); missing entries read as 0"""

    def __init__(self):
        self._table: dict[EnvState, dict[int, float]] = {}

    def __len__(self) -> int:
        return sum(len(row) for row in self._table.values())

    def get(self, x: EnvState, a: int) -> float:
        return self._table.get(x, {}).get(a, 0.0)

    def set(self, x: EnvState, a: int, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"Q values must be finite, got {value}")
        self._table.setdefault(x, {})[a] = value

    def row(self, x: EnvState) -> dict[int, float]:
        return self._table.get(x, {})

    def max_value(self, x: EnvState, n_actions: int) -> float:
        row = self.row(x)
        if not row:
            return 0.0
        best = max(row.values())
        return max(best, 0.0) if len(row) < n_actions else best

    def greedy(self, x: EnvState, space: ActionSpace) -> int:
        """argmax_a Q(x, a), smallest id on ties, unvisited actions valued 0"""
        row = self.row(x)
        if not row:
            return space.first_unvisited(())
        best_value = max(row.values())
        best = min(a for a, v in row.items() if v == best_value)
        if len(row) >= space.size or best_value > 0:
            return best
        unvisited = space.first_unvisited(row)
        if best_value < 0:
            return unvisited
        return min(best, unvisited)

    def items(self):
        for x in sorted(self._table):
            for a in sorted(self._table[x]):
                yield x, a, self._table[x][a]

    def dump(self, path: str | Path) -> None:
        rows = [{"state": list(x), "action": int(a), "value": float(v)} for x, a, v in self.items()]
        with Path(path).open("w", encoding="utf-8", newline="\n") as f:
            yaml.safe_dump(rows, f, sort_keys=False)

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        with Path(path).open(encoding="utf-8") as f:
            rows = yaml.safe_load(f) or []
        q = cls()
        try:
            for row in rows:
                q.set(EnvState(*row["state"]), int(row["action"]), float(row["value"]))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed Q-table dump {path}: {e}") from e
        return q


@dataclass(frozen=True)
class Experience:
    state: EnvState
    action: int
    reward: float
    next_state: EnvState


class StackSet:
    """G circular stacks of B (state, action, reward) records"""

    def __init__(self, n_stacks: int, stack_length: int):
        self.n_stacks = n_stacks
        self.stack_length = stack_length
        self.stacks = [[None] * stack_length for _ in range(n_stacks)]
        self._keys = [Counter() for _ in range(n_stacks)]

    @property
    def capacity(self) -> int:
        return self.n_stacks * self.stack_length

    def active(self, k: int) -> bool:
        return k < self.capacity

    def slot(self, k: int) -> tuple[int, int]:
        """(stack, element) for step k"""
        i = k % self.n_stacks
        return i, (k // self.n_stacks) % self.stack_length

    def contains(self, k: int, x: EnvState, a: int) -> bool:
        return self._keys[k % self.n_stacks][(x, a)] > 0

    def fill(self, i: int) -> int:
        return sum(r is not None for r in self.stacks[i])


def novelty_check(stacks: StackSet, k: int, x: EnvState, a: int, r: Optional[float] = None) -> int:
    """1 when (x, a) is not recorded in the stack that step k routes to"""
    if not stacks.active(k):
        return 1
    return 0 if stacks.contains(k, x, a) else 1


def record(stacks: StackSet, k: int, x: EnvState, a: int, r: float) -> None:
    if stacks.capacity == 0:
        return
    i, j = stacks.slot(k)
    old = stacks.stacks[i][j]
    if old is not None:
        stacks._keys[i][(old[0], old[1])] -= 1
    stacks.stacks[i][j] = (x, a, r)
    stacks._keys[i][(x, a)] += 1


def q_update(q: QTable, e: Experience, qgate: int, alpha: float, gamma: float, n_actions: int) -> None:
    if not qgate:
        return
    current = q.get(e.state, e.action)
    target = e.reward + gamma * q.max_value(e.next_state, n_actions)
    q.set(e.state, e.action, current + alpha * (target - current))


def select_action(q: QTable, x: EnvState, space: ActionSpace, epsilon: float, rng: np.random.Generator) -> int:
    """epsilon-greedy: uniform over the space with probability epsilon, else greedy"""
    if rng.random() < epsilon:
        return space.sample(rng)
    return q.greedy(x, space)


def epsilon_at(params: LearnerParams, k: int) -> float:
    if not params.epsilon_decay_steps or params.epsilon_final is None:
        return params.epsilon
    frac = min(k / params.epsilon_decay_steps, 1.0)
    return params.epsilon + frac * (params.epsilon_final - params.epsilon)


class Agent:
    """Learner of one BS"""

    def __init__(
        self,
        n: int,
        space: ActionSpace,
        rates: BsRates,
        params: LearnerParams,
        associated_users: list[int],
        use_stacks: bool = True,
        learning: bool = True,
    ):
        self.n = n
        self.space = space
        self.rates = rates
        self.params = params
        self.q = QTable()
        self.stacks = StackSet(params.n_stacks if use_stacks else 0, params.stack_length)
        self.learning = learning
        self.k = 0
        self.cycle = associated_users
        self.action = 0
        self.pattern: Optional[ActionPattern] = None
        self.state: Optional[EnvState] = None
        self.retries = 0

    @property
    def m_star(self) -> int:
        return self.cycle[self.k % len(self.cycle)]

    def next_m_star(self) -> int:
        return self.cycle[(self.k + 1) % len(self.cycle)]

    def choose(self, rng: np.random.Generator, use_stacks: bool = True) -> tuple[int, int]:
        """(action id, q gate) for the current step; use_stacks=False skips the novelty filter"""
        if not self.learning:
            return self.space.sample(rng), 0
        a = select_action(self.q, self.state, self.space, epsilon_at(self.params, self.k), rng)
        if not (use_stacks and self.stacks.active(self.k)):
            return a, 1
        tries = 0
        while not novelty_check(self.stacks, self.k, self.state, a) and tries < self.params.retry_cap:
            a = self.space.sample(rng)
            tries += 1
        self.retries += tries
        return a, novelty_check(self.stacks, self.k, self.state, a)

    def commit(self, a: int, qgate: int, r: float, next_state: EnvState, use_stacks: bool = True) -> Experience:
        e = Experience(self.state, a, r, next_state)
        if self.learning:
            if qgate and use_stacks and self.stacks.active(self.k):
                record(self.stacks, self.k, self.state, a, r)
            q_update(self.q, e, qgate, self.params.alpha, self.params.gamma, self.space.size)
        self.state = next_state
        self.k += 1
        if self.k % 1000 == 0:
            logger.debug(f"BS {self.n}: k={self.k} |Q|={len(self.q)} retries={self.retries}")
        return e


class World:
    """Scenario plus the agents of every BS; owns the run's RNG streams"""

    def __init__(
        self,
        s: NetworkScenario,
        agents: list[Agent],
        rng: np.random.Generator,
        mu_policy: MuPolicy = "optimal",
        eval_rng: Optional[np.random.Generator] = None,
    ):
        self.s = s
        self.agents = agents
        self.rng = rng
        self.eval_rng = eval_rng if eval_rng is not None else np.random.default_rng(0)
        self.mu_policy = mu_policy
        params = agents[0].params
        self.reward_reference = params.reward_reference
        self.reward_floor = params.reward_floor
        self.reward_scale = params.reward_reference_scale
        self.n_bins = params.n_delay_bins
        self.reference = self.reward_scale * local_reference_delay(s, params.reward_reference)
        self.last_report: Optional[DelayReport] = None
        self.initial_states: list[EnvState] = []
        self._initialise()

    def _initialise(self) -> None:
        # initial state: every BS idle
        ids = [a.space.first_unvisited(()) for a in self.agents]
        idle = [a.space.realize(i, self.eval_rng) for a, i in zip(self.agents, ids)]
        report = self.execute(ids, idle, rng=self.eval_rng)
        for agent, a, pattern in zip(self.agents, ids, idle):
            agent.action, agent.pattern = a, pattern
            agent.state = EnvState(self.bin(report.max_delay), report.argmax_user, agent.m_star)
        self.initial_states = [agent.state for agent in self.agents]
        self.last_report = report

    def bin(self, t_max: float) -> int:
        return discretize(t_max, self.reference, self.n_bins)

    def execute(self, action_ids: list[int], patterns: list[ActionPattern], rng=None) -> DelayReport:
        rows = [agent.rates.lookup(a, p) for agent, a, p in zip(self.agents, action_ids, patterns)]
        ul = np.stack([r[0] for r in rows])
        dl = np.stack([r[1] for r in rows])
        served = np.stack([r[2] for r in rows])
        ul_m, dl_m, _ = joint_user_rates(ul, dl, served)
        mu_rng = rng if rng is not None else self.rng
        delays, mu = delays_from_rates(self.s, ul_m, dl_m, self.mu_policy, mu_rng)
        return DelayReport.from_delays(delays, mu)

    def reward(self, report: DelayReport) -> float:
        return reward(self.s, report, self.reward_reference, self.reward_floor, self.reward_scale)

    def next_state(self, agent: Agent, report: DelayReport) -> EnvState:
        return EnvState(self.bin(report.max_delay), report.argmax_user, agent.next_m_star())

    def step(self) -> tuple[list[Experience], DelayReport, list[int]]:
        """All BSs select, the joint action executes once, then every agent updates"""
        choices = [agent.choose(self.rng) for agent in self.agents]
        ids = [a for a, _ in choices]
        patterns = [agent.space.realize(a, self.rng) for agent, a in zip(self.agents, ids)]
        report = self.execute(ids, patterns)
        r = self.reward(report)
        experiences = []
        for agent, (a, qgate), pattern in zip(self.agents, choices, patterns):
            agent.action, agent.pattern = a, pattern
            experiences.append(agent.commit(a, qgate, r, self.next_state(agent, report)))
        self.last_report = report
        return experiences, report, [g for _, g in choices]

    def greedy_rollout(self, horizon: int) -> DelayReport:
        """Play the joint greedy policy from the initial state for `horizon` steps.

        Nothing is learned or recorded. Returns the worst report of the
        second half of the rollout, so a policy that keeps falling back to
        an unserved allocation reports an infinite delay.
        """
        if horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {horizon}")
        states = list(self.initial_states)
        worst: Optional[DelayReport] = None
        for h in range(horizon):
            ids = [a.q.greedy(x, a.space) for a, x in zip(self.agents, states)]
            patterns = [a.space.realize(i, self.eval_rng) for a, i in zip(self.agents, ids)]
            report = self.execute(ids, patterns, rng=self.eval_rng)
            if h >= horizon // 2 and (worst is None or report.max_delay > worst.max_delay):
                worst = report
            states = [
                EnvState(self.bin(report.max_delay), report.argmax_user, a.cycle[(h + 1) % len(a.cycle)])
                for a in self.agents
            ]
        return worst


def step(agent: Agent, world: World, use_stacks: bool = True) -> Experience:
    """One iteration for a single BS with the other BSs' current actions held fixed"""
    a, qgate = agent.choose(world.rng, use_stacks)
    pattern = agent.space.realize(a, world.rng)
    ids = [ag.action for ag in world.agents]
    patterns = [ag.pattern for ag in world.agents]
    ids[agent.n], patterns[agent.n] = a, pattern
    report = world.execute(ids, patterns)
    agent.action, agent.pattern = a, pattern
    world.last_report = report
    return agent.commit(a, qgate, world.reward(report), world.next_state(agent, report), use_stacks)


def baseline_q_step(agent: Agent, world: World) -> Experience:
    """step() with the stack mechanism bypassed: every update is applied, the stacks are left as they are"""
    return step(agent, world, use_stacks=False)
