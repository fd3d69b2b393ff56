"""Exact and bounded win/tie/loss probabilities for binomial duels.

A *binomial duel* draws two independent variables B_k(p) and B_k(q) and
asks which one is larger.  The triple

    (P(B_k(p) < B_k(q)),  P(B_k(p) = B_k(q)),  P(B_k(p) > B_k(q)))

is the primitive that every opinion-flip probability in the FET protocol
reduces to, so this module is the computational core of the package.
Everything here is a pure function of its arguments and safe for
concurrent use.

The exact triple is computed from the two probability mass functions,
which are themselves evaluated in log space for numerical stability.
Closed-form lower bounds on the favorite's and the underdog's win
probability are provided alongside, expressed through the Hoeffding
tail and a Berry-Esseen normal correction respectively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = [
    "BERRY_ESSEEN_C",
    "DuelProbs",
    "advantage",
    "binomial_pmf",
    "binomial_pmf_vector",
    "difference_distribution",
    "exact_duel",
    "hoeffding_duel_bound",
    "normal_cdf",
    "underdog_lower_bound",
]

# Berry-Esseen constant used by the underdog bound.
BERRY_ESSEEN_C = 0.4748


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must be a probability in [0, 1], got {value!r}")
    return value


def _check_count(name: str, value: int, minimum: int = 0) -> int:
    if value != int(value) or int(value) < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class DuelProbs:
    """Outcome probabilities of one binomial duel.

    ``p_lt`` is the probability that the first variable is strictly
    smaller, ``p_eq`` that both are equal, ``p_gt`` that the first is
    strictly larger.  The three fields sum to one up to float round-off.
    """

    p_lt: float
    p_eq: float
    p_gt: float

    def __post_init__(self) -> None:
        for name in ("p_lt", "p_eq", "p_gt"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1.0 + 1e-12:
                raise DomainError(f"DuelProbs.{name} out of [0,1]: {v!r}")
        total = self.p_lt + self.p_eq + self.p_gt
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"DuelProbs does not sum to 1: {total!r}")

    @property
    def p_geq(self) -> float:
        """P(first >= second)."""
        return self.p_gt + self.p_eq

    @property
    def p_leq(self) -> float:
        """P(first <= second)."""
        return self.p_lt + self.p_eq

    def swapped(self) -> "DuelProbs":
        """The duel with the two binomial parameters exchanged."""
        return DuelProbs(p_lt=self.p_gt, p_eq=self.p_eq, p_gt=self.p_lt)


def binomial_pmf_vector(k: int, p: float) -> np.ndarray:
    """Full pmf of Binomial(k, p) as a length k+1 array.

    Each entry is evaluated in log space (lgamma for the binomial
    coefficient) so no intermediate quantity over- or underflows for k
    up to the supported ~10^4; entries sum to 1 within a few k*eps.
    """
    k = _check_count("k", k)
    p = _check_prob("p", p)
    if p == 0.0:
        out = np.zeros(k + 1)
        out[0] = 1.0
        return out
    if p == 1.0:
        out = np.zeros(k + 1)
        out[k] = 1.0
        return out
    i = np.arange(k + 1)
    log_pmf = (
        gammaln(k + 1)
        - gammaln(i + 1)
        - gammaln(k - i + 1)
        + i * math.log(p)
        + (k - i) * math.log1p(-p)
    )
    return np.exp(log_pmf)


def binomial_pmf(k: int, p: float, i: int) -> float:
    """P(Binomial(k, p) = i), evaluated stably in log space."""
    k = _check_count("k", k)
    p = _check_prob("p", p)
    if not 0 <= i <= k:
        raise DomainError(f"outcome count i must satisfy 0 <= i <= k, got {i!r}")
    i = int(i)
    if p == 0.0:
        return 1.0 if i == 0 else 0.0
    if p == 1.0:
        return 1.0 if i == k else 0.0
    log_pmf = (
        math.lgamma(k + 1)
        - math.lgamma(i + 1)
        - math.lgamma(k - i + 1)
        + i * math.log(p)
        + (k - i) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def exact_duel(k: int, p: float, q: float) -> DuelProbs:
    """Exact duel triple for B_k(p) versus B_k(q).

    Sums pmf products over the outcome grid, folded to O(k) with
    cumulative sums of the second pmf.  All three components are
    computed independently; their sum being 1 is a checked invariant,
    not an enforced one.
    """
    k = _check_count("k", k, minimum=1)
    pmf_p = binomial_pmf_vector(k, p)
    pmf_q = binomial_pmf_vector(k, q)
    cdf_q = np.cumsum(pmf_q)
    # P(B(q) <= i - 1), i.e. the strictly-below mass seen from outcome i.
    cdf_q_below = np.concatenate(([0.0], cdf_q[:-1]))
    p_eq = float(pmf_p @ pmf_q)
    p_lt = float(pmf_p @ (1.0 - cdf_q))
    p_gt = float(pmf_p @ cdf_q_below)

    def _clamp(v: float) -> float:
        return min(max(v, 0.0), 1.0)

    return DuelProbs(p_lt=_clamp(p_lt), p_eq=_clamp(p_eq), p_gt=_clamp(p_gt))


@lru_cache(maxsize=1 << 16)
def exact_duel_cached(k: int, p: float, q: float) -> DuelProbs:
    """Memoized exact_duel for hot loops over repeated grid pairs."""
    return exact_duel(k, p, q)


def difference_distribution(k: int, p: float, q: float) -> np.ndarray:
    """pmf of the signed difference B_k(q) - B_k(p).

    Returns a length 2k+1 array where index d+k holds
    P(B_k(q) - B_k(p) = d), d in [-k, k].
    """
    k = _check_count("k", k, minimum=1)
    pmf_p = binomial_pmf_vector(k, p)
    pmf_q = binomial_pmf_vector(k, q)
    # index m = i_q + (k - i_p) runs over 0..2k, so d = m - k.
    return np.convolve(pmf_q, pmf_p[::-1])


def hoeffding_duel_bound(k: int, p: float, q: float) -> float:
    """Lower bound on P(B_k(p) < B_k(q)) for p < q: 1 - exp(-k(q-p)^2 / 2).

    Effective when the gap q - p is large; tends to 0 as q -> p.
    """
    k = _check_count("k", k, minimum=1)
    p = _check_prob("p", p)
    q = _check_prob("q", q)
    if not p < q:
        raise DomainError(f"hoeffding_duel_bound requires p < q, got p={p}, q={q}")
    return 1.0 - math.exp(-0.5 * k * (q - p) ** 2)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via math.erf.

    The C library erf is correctly rounded to double precision, so the
    absolute error here is far below the 1e-7 budget the bound
    consumers assume.
    """
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def underdog_lower_bound(k: int, p: float, q: float) -> float:
    """Lower bound on P(B_k(p) > B_k(q)) for p < q (the upset probability).

    Normal approximation of the sample difference with a Berry-Esseen
    correction:

        max(0, 1 - Phi(sqrt(k)(q-p)/sigma) - C/(sigma sqrt(k)))

    with C = 0.4748 and sigma = sqrt(p(1-p) + q(1-q)).  Vacuous (0) for
    small k or degenerate parameters; informative for k >= ~30 and
    near-tied coins.
    """
    k = _check_count("k", k, minimum=1)
    p = _check_prob("p", p)
    q = _check_prob("q", q)
    if not p < q:
        raise DomainError(f"underdog_lower_bound requires p < q, got p={p}, q={q}")
    sigma = math.sqrt(p * (1.0 - p) + q * (1.0 - q))
    if sigma == 0.0:
        return 0.0
    value = (
        1.0
        - normal_cdf(math.sqrt(k) * (q - p) / sigma)
        - BERRY_ESSEEN_C / (sigma * math.sqrt(k))
    )
    return max(0.0, value)


def advantage(d: int, p: float, q: float) -> float:
    """Relative edge of the better coin given a lead of d heads.

        ((q(1-p))^d - (p(1-q))^d) / ((q(1-p))^d + (p(1-q))^d)

    Computed through the ratio r = p(1-q) / (q(1-p)) <= 1 as
    (1 - r^d) / (1 + r^d), which cannot overflow and degrades
    gracefully to 1.0 when r^d underflows.  Nondecreasing in d.
    """
    d = _check_count("d", d, minimum=1)
    p = _check_prob("p", p)
    q = _check_prob("q", q)
    if not (0.0 < p <= q < 1.0):
        raise DomainError(
            f"advantage requires 0 < p <= q < 1 (denominator would vanish), got p={p}, q={q}"
        )
    r = (p * (1.0 - q)) / (q * (1.0 - p))
    rd = r**d
    return (1.0 - rd) / (1.0 + rd)
