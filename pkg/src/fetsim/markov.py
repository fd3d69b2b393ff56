"""Exact pair-state Markov chain analysis for small populations.

Conditioned on the pair (k_t, k_t1) of opinion-1 counts at consecutive
rounds (source opinion fixed to 1), the next count is distributed as

    k_{t+2} ~ 1 + Bin(k_t1 - 1, p_keep_one) + Bin(n - k_t1, p_gain_one)

with flip probabilities evaluated at (k_t/n, k_t1/n).  This module
builds that transition kernel by exact convolution of binomial pmfs,
solves the first-step equations for expected hitting times of the
absorbing state (n, n), and cross-validates both simulation backends
against the solver.

The pair-state chain ignores adversarial counter memory, exactly like
the aggregate backend; the bridge from an adversarial start is one
agent-level round, and reports state this in their header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .duel import binomial_pmf_vector
from .dynamics import flip_probs
from .errors import StructuralError, UsageError
from .protocol import Population, SimConfig, derive_rng, step_agent_level, step_aggregate

__all__ = [
    "Kernel",
    "PairState",
    "absorption_times",
    "build_kernel",
    "expected_consensus_time_all_wrong",
    "simulate_exact_check",
]

PRUNE_THRESHOLD = 1e-15
BRIDGE_NOTE = (
    "pair-state kernel ignores adversarial counter memory; trials are "
    "bridged by one agent-level round (or by planting counters drawn "
    "from Bin(ell, k_t/n), which is the post-round distribution)"
)


@dataclass(frozen=True)
class PairState:
    """Counts of 1-opinions at two consecutive rounds."""

    k_t: int
    k_t1: int


@dataclass
class Kernel:
    """Sparse transition kernel on pair states (k_t, k_t1), k_t1 >= 1.

    State index: (k_t, k_t1) -> k_t * n + (k_t1 - 1); a row holds the
    distribution of the successor pair (k_t1, k_{t+2}).  Probabilities
    below PRUNE_THRESHOLD are dropped and their total tracked in
    pruned_mass.
    """

    n: int
    ell: int
    matrix: sparse.csr_matrix
    pruned_mass: float

    @property
    def num_states(self) -> int:
        return (self.n + 1) * self.n

    def state_index(self, k_t: int, k_t1: int) -> int:
        if not (0 <= k_t <= self.n and 1 <= k_t1 <= self.n):
            raise UsageError(f"invalid pair state ({k_t}, {k_t1}) for n={self.n}")
        return k_t * self.n + (k_t1 - 1)

    def state_of_index(self, idx: int) -> PairState:
        return PairState(idx // self.n, idx % self.n + 1)

    def next_count_distribution(self, k_t: int, k_t1: int) -> np.ndarray:
        """Distribution of k_{t+2} over 1..n from the pair (k_t, k_t1)."""
        row = self.matrix.getrow(self.state_index(k_t, k_t1))
        out = np.zeros(self.n)
        for idx, p in zip(row.indices, row.data):
            out[idx % self.n] += p
        return out

    @property
    def absorbing_index(self) -> int:
        return self.state_index(self.n, self.n)


def build_kernel(n: int, ell: int) -> Kernel:
    """Exact kernel over all pairs (k_t, k_t1) with k_t1 >= 1.

    Row construction is independent per row (parallelizable); here rows
    are emitted in index order, which keeps the matrix deterministic.
    """
    if n > 256:
        raise UsageError(f"build_kernel supports n <= 256 (cost control), got {n}")
    if not 1 <= ell <= n:
        raise UsageError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    pruned = 0.0
    for k_t in range(n + 1):
        for k_t1 in range(1, n + 1):
            fp = flip_probs(k_t / n, k_t1 / n, ell)
            keep = binomial_pmf_vector(k_t1 - 1, fp.p_keep_one)
            gain = binomial_pmf_vector(n - k_t1, fp.p_gain_one)
            dist = np.convolve(keep, gain)  # over k_{t+2} - 1 in 0..n-1
            mask = dist >= PRUNE_THRESHOLD
            pruned += float(dist[~mask].sum())
            succ = np.nonzero(mask)[0]  # k_{t+2} = succ + 1
            row_idx = k_t * n + (k_t1 - 1)
            rows.append(np.full(succ.shape, row_idx, dtype=np.int64))
            cols.append(k_t1 * n + succ)
            vals.append(dist[succ])
    size = (n + 1) * n
    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )
    return Kernel(n=n, ell=ell, matrix=matrix, pruned_mass=pruned)


def _validate_rows(kernel: Kernel, tol: float = 1e-10) -> None:
    sums = np.asarray(kernel.matrix.sum(axis=1)).ravel()
    bad = np.nonzero(np.abs(sums - 1.0) > tol)[0]
    if bad.size:
        states = [kernel.state_of_index(int(i)) for i in bad[:10]]
        raise StructuralError(
            f"{bad.size} kernel row(s) do not sum to 1 within {tol}; "
            f"first offenders: {states}"
        )


def _check_absorbing(kernel: Kernel) -> None:
    """Verify (n, n) is absorbing, unique, and reachable from every state."""
    absorbing = kernel.absorbing_index
    diag = kernel.matrix.diagonal()
    if abs(diag[absorbing] - 1.0) > 1e-12:
        raise StructuralError("state (n, n) is not absorbing")
    others = np.nonzero(diag >= 1.0 - 1e-12)[0]
    others = others[others != absorbing]
    if others.size:
        states = [kernel.state_of_index(int(i)) for i in others[:10]]
        raise StructuralError(f"unexpandable self-loop states besides (n,n): {states}")
    # Reverse reachability sweep: every state must reach the absorber.
    reached = breadth_first_order(
        kernel.matrix.T, absorbing, directed=True, return_predecessors=False
    )
    missing = np.setdiff1d(np.arange(kernel.num_states), reached, assume_unique=False)
    if missing.size:
        states = [kernel.state_of_index(int(i)) for i in missing[:10]]
        raise StructuralError(
            f"{missing.size} state(s) cannot reach (n,n); first offenders: {states}"
        )


def absorption_times(kernel: Kernel) -> np.ndarray:
    """Expected rounds to reach (n, n) from every pair state.

    Validates row normalization and absorbency, then solves the
    first-step linear system (I - Q) h = 1 over transient states with a
    sparse direct solve, verified to relative residual 1e-10.
    Index the result with kernel.state_index.
    """
    _validate_rows(kernel)
    _check_absorbing(kernel)
    size = kernel.num_states
    absorbing = kernel.absorbing_index
    transient = np.arange(size) != absorbing
    q = kernel.matrix[transient][:, transient].tocsr()
    ident = sparse.identity(q.shape[0], format="csr")
    rhs = np.ones(q.shape[0])
    h_transient = spsolve(ident - q, rhs)
    residual = np.linalg.norm((ident - q) @ h_transient - rhs) / np.linalg.norm(rhs)
    if residual > 1e-10:
        raise StructuralError(f"linear solve residual {residual:.3e} exceeds 1e-10")
    h = np.zeros(size)
    h[transient] = h_transient
    return h


def expected_consensus_time_all_wrong(kernel: Kernel, times: np.ndarray) -> float:
    """Exact expected consensus round from the all-wrong start.

    With counters zeroed, a round-0 agent flips to 1 iff it sees at
    least one 1 among its ell fresh samples, so
    k_1 = 1 + Bin(n - 1, 1 - (1 - 1/n)^ell) and the consensus round
    equals the kernel hitting time from (1, k_1).
    """
    n, ell = kernel.n, kernel.ell
    p_flip = 1.0 - (1.0 - 1.0 / n) ** ell
    weights = binomial_pmf_vector(n - 1, p_flip)  # over k_1 - 1
    return float(
        sum(
            weights[b - 1] * times[kernel.state_index(1, b)]
            for b in range(1, n + 1)
        )
    )


def plant_pair_population(
    n: int, ell: int, k_t: int, k_t1: int, rng: np.random.Generator
) -> Population:
    """Agent configuration whose law matches the kernel state (k_t, k_t1).

    Opinions hold k_t1 ones (source first); stored counters are i.i.d.
    Bin(ell, k_t/n), the distribution they have after any round with
    fraction k_t/n.
    """
    opinions = np.zeros(n, dtype=np.uint8)
    opinions[:k_t1] = 1
    counters = rng.binomial(ell, k_t / n, size=n).astype(np.int32)
    return Population(opinions, counters)


def _simulate_hitting_times(
    n: int,
    ell: int,
    trials: int,
    seed: int,
    backend: str,
    max_rounds: int,
) -> np.ndarray:
    """Consensus rounds from the all-wrong start, one entry per trial.

    Agent-level trials run in lockstep as one vectorized batch; the
    aggregate backend runs its mandatory first round agent-level and
    then steps pairs.
    """
    config = SimConfig(n=n, ell=ell, backend=backend, seed=seed, max_rounds=max_rounds)
    if backend == "agent":
        rng = derive_rng(seed, "hitting", backend)
        opinions = np.zeros((trials, n), dtype=np.uint8)
        opinions[:, 0] = 1
        counters = np.zeros((trials, n), dtype=np.int32)
        times = np.full(trials, -1, dtype=np.int64)
        active = np.arange(trials)
        for round_idx in range(1, max_rounds + 1):
            m = active.size
            if m == 0:
                break
            idx = rng.integers(0, n, size=(m, n, 2 * ell))
            obs = opinions[active][np.arange(m)[:, None, None], idx]
            c_fresh = obs[:, :, :ell].sum(axis=2, dtype=np.int32)
            c_store = obs[:, :, ell:].sum(axis=2, dtype=np.int32)
            prev = counters[active]
            cur = opinions[active]
            new_op = np.where(c_fresh > prev, 1, np.where(c_fresh < prev, 0, cur))
            new_op = new_op.astype(np.uint8)
            new_op[:, 0] = 1
            opinions[active] = new_op
            counters[active] = c_store
            done = new_op.sum(axis=1) == n
            times[active[done]] = round_idx
            active = active[~done]
        if active.size:
            raise StructuralError(
                f"{active.size} agent-level trial(s) did not converge in {max_rounds} rounds"
            )
        return times
    times = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        rng = derive_rng(seed, "hitting", backend, t)
        opinions = np.zeros(n, dtype=np.uint8)
        opinions[0] = 1
        pop = Population(opinions, np.zeros(n, dtype=np.int32))
        pop = step_agent_level(pop, config, rng)
        xs = [1.0 / n, pop.fraction_ones()]
        while xs[-1] != 1.0 and len(xs) <= max_rounds:
            xs.append(step_aggregate(xs[-2], xs[-1], config, rng))
        if xs[-1] != 1.0:
            raise StructuralError(f"aggregate trial {t} did not converge")
        times[t] = len(xs) - 1  # first round with fraction exactly 1
    return times


def simulate_exact_check(
    n: int,
    ell: int,
    trials: int = 10_000,
    seed: int = 0,
    max_rounds: int = 100_000,
    kernel: Kernel | None = None,
) -> dict:
    """Cross-validate both backends against the exact solver.

    Runs `trials` trials per backend from the all-wrong start, compares
    each empirical mean consensus time to the kernel-derived exact
    expectation at 3 standard errors, and the two backends to each
    other.  Returns a JSON-ready report; verdicts are in report["pass"].
    """
    if n > 64:
        raise UsageError(f"simulate_exact_check supports n <= 64, got {n}")
    if kernel is None:
        kernel = build_kernel(n, ell)
    times = absorption_times(kernel)
    exact = expected_consensus_time_all_wrong(kernel, times)

    report: dict = {
        "n": n,
        "ell": ell,
        "trials": trials,
        "seed": seed,
        "note": BRIDGE_NOTE,
        "exact_expected_rounds": exact,
        "pruned_mass": kernel.pruned_mass,
        "backends": {},
    }
    means = {}
    ses = {}
    overall = True
    for backend in ("agent", "aggregate"):
        sample = _simulate_hitting_times(n, ell, trials, seed, backend, max_rounds)
        mean = float(sample.mean())
        se = float(sample.std(ddof=1) / math.sqrt(trials))
        ok = abs(mean - exact) <= 3.0 * se
        means[backend], ses[backend] = mean, se
        overall &= ok
        report["backends"][backend] = {
            "mean": mean,
            "stderr": se,
            "ci99_low": mean - 3 * se,
            "ci99_high": mean + 3 * se,
            "matches_exact_3sigma": ok,
        }
    cross_se = math.hypot(ses["agent"], ses["aggregate"])
    cross_ok = abs(means["agent"] - means["aggregate"]) <= 3.0 * cross_se
    overall &= cross_ok
    report["backends_agree_3sigma"] = cross_ok
    report["pass"] = bool(overall)
    return report
