"""Agent-level and aggregate simulation backends for the FET protocol.

FET (Follow the Emerging Trend), executed by every non-source agent at
every round: observe 2*ell uniformly random agents (with replacement,
self included), split the observations uniformly into two halves S' and
S'' of size ell, count the 1-opinions c' = Count(S') and
c'' = Count(S''), and update

    opinion <- 1   if c' > stored c'' from the previous round
    opinion <- 0   if c' < stored c''
    opinion unchanged on a tie,

then store the fresh c'' for the next round.  The source agent ignores
the rule and keeps the correct opinion throughout.

Two backends are provided.  The agent-level backend executes the rule
faithfully, including arbitrary adversarial counter memory.  The
aggregate backend replaces one round by two binomial draws over the
current pair of fractions (x_t, x_{t+1}); conditioned on that pair the
two are identically distributed, which the test suite verifies.  A
fresh adversarial start corrupts each agent's stored counter in ways
the pair state cannot represent, so every trial runs its first round
agent-level and only then may switch to the aggregate backend.

Randomness is drawn from counter-based Philox streams keyed by hashes
of (seed, trial, ...), so parallel trials are reproducible
independently of scheduling.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domains import DomainLabel, YellowLabel, classify, classify_yellow
from .dynamics import AnalysisConstants, flip_probs
from .errors import DomainError, UsageError

__all__ = [
    "AgentState",
    "Population",
    "SimConfig",
    "Trajectory",
    "TrajectoryRow",
    "agent_round",
    "derive_rng",
    "init_adversarial",
    "mirror_population",
    "run_trial",
    "step_agent_level",
    "step_aggregate",
]

SOURCE_INDEX = 0
PRESETS = (
    "all_wrong",
    "all_wrong_max_counters",
    "half_half",
    "yellow_center",
    "cyan_corner",
)
# Extra rounds simulated after first consensus to confirm it persists.
# All-correct is absorbing (a separately tested invariant), so a short
# confirmation window is sufficient.
PERSISTENCE_CHECK_ROUNDS = 4


def derive_rng(seed: int, *stream: object) -> np.random.Generator:
    """Philox generator keyed by a hash of (seed, stream labels).

    Distinct label tuples give independent counter-based streams, so
    trial-level parallelism cannot change any result.
    """
    h = hashlib.blake2s(digest_size=16)
    h.update(str(int(seed)).encode())
    for part in stream:
        h.update(b"/")
        h.update(str(part).encode())
    key = np.frombuffer(h.digest(), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SimConfig:
    """Simulation parameters.

    ell is the per-half sample size (an agent reads 2*ell opinions per
    round); when omitted it is derived as ceil(c_sample * ln n).
    backend selects how rounds after the first are executed.
    """

    n: int
    ell: int | None = None
    c_sample: float = 3.0
    delta: float = 0.05
    source_opinion: int = 1
    max_rounds: int = 10_000
    seed: int = 0
    backend: str = "aggregate"
    variant: str = "fet"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise UsageError(f"population size must be >= 2, got {self.n}")
        if self.ell is None:
            self.ell = math.ceil(self.c_sample * math.log(self.n))
        if not 1 <= self.ell <= self.n:
            raise UsageError(f"need 1 <= ell <= n, got ell={self.ell}, n={self.n}")
        if self.max_rounds < 1:
            raise UsageError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.source_opinion not in (0, 1):
            raise UsageError(f"source_opinion must be 0 or 1, got {self.source_opinion}")
        if self.backend not in ("agent", "aggregate"):
            raise UsageError(f"backend must be 'agent' or 'aggregate', got {self.backend!r}")
        if self.variant not in ("fet", "naive"):
            raise UsageError(f"variant must be 'fet' or 'naive', got {self.variant!r}")

    def constants(self) -> AnalysisConstants:
        return AnalysisConstants.for_population(self.n, delta=self.delta, ell=self.ell)


@dataclass(frozen=True)
class AgentState:
    """One agent: opinion bit, stored half-sample count, source flag."""

    opinion: int
    prev_count: int
    is_source: bool = False


def agent_round(
    state: AgentState,
    first_half: "list[int] | np.ndarray",
    second_half: "list[int] | np.ndarray",
    ell: int,
    source_opinion: int = 1,
) -> AgentState:
    """Apply one FET update to a single agent.

    first_half are the ell observed opinion bits whose count is compared
    against the stored count from the previous round; second_half are
    the ell bits whose count replaces the stored one.
    """
    first = np.asarray(first_half)
    second = np.asarray(second_half)
    if first.shape != (ell,) or second.shape != (ell,):
        raise DomainError(
            f"both halves must contain exactly ell={ell} bits, "
            f"got {first.shape} and {second.shape}"
        )
    c_fresh = int(first.sum())
    c_store = int(second.sum())
    if state.is_source:
        return AgentState(source_opinion, c_store, True)
    if c_fresh > state.prev_count:
        opinion = 1
    elif c_fresh < state.prev_count:
        opinion = 0
    else:
        opinion = state.opinion
    return AgentState(opinion, c_store, False)


@dataclass
class Population:
    """Vectorized population state; agent 0 is the source."""

    opinions: np.ndarray  # uint8, shape (n,)
    prev_counts: np.ndarray  # int32, shape (n,)

    def __post_init__(self) -> None:
        self.opinions = np.asarray(self.opinions, dtype=np.uint8)
        self.prev_counts = np.asarray(self.prev_counts, dtype=np.int32)
        if self.opinions.shape != self.prev_counts.shape:
            raise UsageError("opinions and prev_counts must have equal shape")

    @property
    def n(self) -> int:
        return self.opinions.shape[0]

    def fraction_ones(self) -> float:
        return float(self.opinions.sum()) / self.n

    def copy(self) -> "Population":
        return Population(self.opinions.copy(), self.prev_counts.copy())


def mirror_population(pop: Population, ell: int) -> Population:
    """Flip every opinion and reflect every counter (c -> ell - c)."""
    return Population(1 - pop.opinions, ell - pop.prev_counts)


def step_agent_level(
    pop: Population,
    config: SimConfig,
    rng: np.random.Generator,
) -> Population:
    """One synchronous round: all reads against the pre-step population.

    Each agent draws its samples uniformly with replacement over all n
    agents (itself included).  The 2*ell draws are i.i.d., so taking
    the first ell as S' and the rest as S'' is distributionally the
    same as a uniformly random split of the multiset.
    """
    n = pop.n
    ell = config.ell
    if config.variant == "naive":
        # Comparison variant with a single shared sample per round: the
        # fresh count is both compared and stored, which correlates
        # consecutive opinions.  Excluded from all acceptance checks.
        idx = rng.integers(0, n, size=(n, ell))
        counts = pop.opinions[idx].sum(axis=1, dtype=np.int32)
        c_fresh = counts
        c_store = counts
    else:
        idx = rng.integers(0, n, size=(n, 2 * ell))
        obs = pop.opinions[idx]
        c_fresh = obs[:, :ell].sum(axis=1, dtype=np.int32)
        c_store = obs[:, ell:].sum(axis=1, dtype=np.int32)
    new_op = np.where(
        c_fresh > pop.prev_counts,
        1,
        np.where(c_fresh < pop.prev_counts, 0, pop.opinions),
    ).astype(np.uint8)
    new_op[SOURCE_INDEX] = config.source_opinion
    return Population(new_op, c_store)


def _count_from_fraction(x: float, n: int, what: str) -> int:
    k = x * n
    if abs(k - round(k)) > 1e-9:
        raise DomainError(f"{what}={x} is not on the grid of multiples of 1/{n}")
    return int(round(k))


def step_aggregate(
    x_t: float,
    x_t1: float,
    config: SimConfig,
    rng: np.random.Generator,
) -> float:
    """One round at the pair level: two binomial draws over flip counts.

    With source opinion 1 the next count is
    1 + Bin(n*x_{t+1} - 1, p_keep_one) + Bin(n*(1 - x_{t+1}), p_gain_one);
    source opinion 0 runs the mirrored computation.
    """
    n = config.n
    if config.source_opinion == 0:
        mirrored = replace(config, source_opinion=1)
        return 1.0 - step_aggregate(1.0 - x_t, 1.0 - x_t1, mirrored, rng)
    k_t = _count_from_fraction(x_t, n, "x_t")
    k_t1 = _count_from_fraction(x_t1, n, "x_t1")
    if k_t1 < 1:
        raise DomainError(
            "x_t1 must count the source's opinion: need x_t1 >= 1/n with source opinion 1"
        )
    fp = flip_probs(k_t / n, k_t1 / n, config.ell)
    ones_keep = int(rng.binomial(k_t1 - 1, fp.p_keep_one)) if k_t1 > 1 else 0
    ones_gain = int(rng.binomial(n - k_t1, fp.p_gain_one)) if k_t1 < n else 0
    return (1 + ones_keep + ones_gain) / n


def init_adversarial(
    preset,
    config: SimConfig,
    rng: np.random.Generator,
) -> Population:
    """Build a per-agent initial condition for a named adversarial preset.

    Accepted presets: the names in PRESETS, a tuple ("fraction", x0),
    a string "fraction:X", or ("explicit", opinions, prev_counts).
    Counter conventions: all_wrong stores 0, all_wrong_max_counters and
    cyan_corner store ell (maximally misleading memory), the remaining
    presets store uniformly random counters in [0, ell].
    """
    n, ell, src = config.n, config.ell, config.source_opinion
    wrong = 1 - src

    name = preset
    arg = None
    if isinstance(preset, tuple):
        name, *rest = preset
        if name == "explicit":
            opinions, counters = rest
            pop = Population(np.array(opinions), np.array(counters))
            if pop.n != n:
                raise UsageError(f"explicit state has {pop.n} agents, config has {n}")
            if pop.opinions[SOURCE_INDEX] != src:
                raise UsageError("explicit state must give the source its opinion")
            if pop.prev_counts.min() < 0 or pop.prev_counts.max() > ell:
                raise UsageError("explicit counters must lie in [0, ell]")
            return pop
        arg = rest[0] if rest else None
    elif isinstance(preset, str) and preset.startswith("fraction:"):
        name, arg = "fraction", float(preset.split(":", 1)[1])

    opinions = np.full(n, wrong, dtype=np.uint8)
    opinions[SOURCE_INDEX] = src

    def random_counters() -> np.ndarray:
        return rng.integers(0, ell + 1, size=n).astype(np.int32)

    def with_ones(total_ones: int, counters: np.ndarray) -> Population:
        total_ones = int(min(max(total_ones, 1 if src == 1 else 0), n))
        op = np.zeros(n, dtype=np.uint8)
        if src == 1:
            op[SOURCE_INDEX] = 1
            op[1 : total_ones] = 1
        else:
            op[1 : 1 + total_ones] = 1
        return Population(op, counters)

    if name == "all_wrong":
        return Population(opinions, np.zeros(n, dtype=np.int32))
    if name == "all_wrong_max_counters":
        return Population(opinions, np.full(n, ell, dtype=np.int32))
    if name == "cyan_corner":
        op = np.full(n, wrong, dtype=np.uint8)
        op[SOURCE_INDEX] = src
        return Population(op, np.full(n, ell, dtype=np.int32))
    if name == "half_half":
        # Half the non-source agents (round half up) hold opinion 1,
        # plus the source: n = 64 gives x_0 = 33/64 with source opinion 1.
        non_source_ones = math.floor((n - 1) / 2 + 0.5)
        total = non_source_ones + (1 if src == 1 else 0)
        return with_ones(total, random_counters())
    if name == "yellow_center":
        total = math.floor(n / 2 + 0.5)
        return with_ones(total, random_counters())
    if name == "fraction":
        if arg is None or not 0.0 <= float(arg) <= 1.0:
            raise UsageError(f"fraction preset needs x0 in [0,1], got {arg!r}")
        return with_ones(int(round(float(arg) * n)), random_counters())
    raise UsageError(f"unknown preset {preset!r}; known: {PRESETS}, fraction:X, explicit")


@dataclass(frozen=True)
class TrajectoryRow:
    round: int
    x: float
    domain: DomainLabel | None
    yellow: YellowLabel | None


@dataclass
class Trajectory:
    """One trial's fraction path with per-pair domain labels.

    Row t carries x_t and the labels of the pair (x_t, x_{t+1}); the
    final row's labels are None since it has no successor.
    converged_round is the first round at which every opinion equals
    the source's, confirmed to persist (all-correct is absorbing).
    """

    rows: list[TrajectoryRow] = field(default_factory=list)
    converged_round: int | None = None

    @property
    def xs(self) -> list[float]:
        return [r.x for r in self.rows]

    def domain_sequence(self) -> list[DomainLabel]:
        return [r.domain for r in self.rows if r.domain is not None]


def run_trial(
    config: SimConfig,
    initial,
    trial: int = 0,
) -> Trajectory:
    """Run one trial to consensus persistence or the round cap.

    ``initial`` is a preset accepted by init_adversarial or an explicit
    Population.  The first round always executes agent-level (the pair
    state cannot encode adversarial counters); afterwards the configured
    backend takes over.  Hitting the cap without consensus yields a
    trajectory with converged_round = None, not an error.
    """
    rng = derive_rng(config.seed, "trial", trial)
    if isinstance(initial, Population):
        pop = initial.copy()
    else:
        pop = init_adversarial(initial, config, rng)
    try:
        constants = config.constants()
    except DomainError:
        # The partition constants need ln n > 1; below that every pair
        # is reported Unclassified rather than erroring.
        constants = None
    n = config.n
    target = 1.0 if config.source_opinion == 1 else 0.0

    xs: list[float] = [pop.fraction_ones()]
    consensus_at: int | None = 0 if xs[0] == target else None

    agent_mode_pop: Population | None = pop
    round_idx = 0
    while round_idx < config.max_rounds:
        round_idx += 1
        if config.backend == "agent" or round_idx == 1:
            assert agent_mode_pop is not None
            agent_mode_pop = step_agent_level(agent_mode_pop, config, rng)
            x_next = agent_mode_pop.fraction_ones()
            if config.backend == "aggregate" and round_idx == 1:
                agent_mode_pop = None
        else:
            x_next = step_aggregate(xs[-2], xs[-1], config, rng)
        xs.append(x_next)
        if x_next == target:
            if consensus_at is None:
                consensus_at = round_idx
            if round_idx - consensus_at >= PERSISTENCE_CHECK_ROUNDS:
                break
        else:
            consensus_at = None

    rows = []
    for t, x in enumerate(xs):
        if t + 1 < len(xs):
            pair = (x, xs[t + 1])
            if constants is None:
                domain, yellow = DomainLabel.UNCLASSIFIED, YellowLabel.OUTSIDE
            else:
                domain = classify(pair, n, constants)
                yellow = classify_yellow(pair, constants)
            rows.append(TrajectoryRow(round=t, x=x, domain=domain, yellow=yellow))
        else:
            rows.append(TrajectoryRow(round=t, x=x, domain=None, yellow=None))
    return Trajectory(rows=rows, converged_round=consensus_at)
