"""Domain partition of the pair-state grid and its audit.

The state space is the grid G = {0, 1/n, ..., 1}^2 of consecutive
opinion-1 fractions (x_t, x_{t+1}).  It is partitioned into regions
with qualitatively different dynamics:

    Green1   x_{t+1} >= x_t + delta                      (high speed up)
    Purple1  1/ln n <= x_t < 1/2 - 3 delta  and
             (1 - lambda_n) x_t <= x_{t+1} < x_t + delta  (slow, far from 1/2)
    Red1     1/ln n <= x_{t+1}  and  x_t < 1/2 - 3 delta  and
             x_t - delta <= x_{t+1} < (1 - lambda_n) x_t  (shrinking)
    Cyan1    min(x_t, x_{t+1}) < 1/ln n  and
             |x_{t+1} - x_t| < delta                      (near wrong consensus)
    Yellow   |x_t - 1/2| <= 3 delta  and
             1/2 - 4 delta <= x_{t+1} <= 1/2 + 4 delta and
             |x_{t+1} - x_t| < delta                      (central, low speed)

plus the point reflections of the first four through (1/2, 1/2)
(Green0, Purple0, Red0, Cyan0).  The written Yellow x-range contains an
obvious typo in its source material; the reading implemented here is
the symmetric band |x_t - 1/2| <= 3 delta, and the audit records that
choice in its header.

The bounding box Yellow' = [1/2-4d, 1/2+4d]^2 is itself split into
A/B/C sub-areas used by the escape analysis.

Boundary inequalities are implemented exactly as written (strict vs
non-strict); where several definitions match a point, classification
applies the fixed precedence Green > Purple > Red > Cyan > Yellow with
the 1-variant before the 0-variant, and ``audit_partition`` quantifies
every gap and overlap instead of hiding them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import AnalysisConstants
from .errors import UsageError

__all__ = [
    "DomainLabel",
    "GridPoint",
    "PartitionAudit",
    "YellowLabel",
    "audit_partition",
    "classify",
    "classify_yellow",
    "matching_domains",
]


class DomainLabel(str, Enum):
    GREEN1 = "Green1"
    GREEN0 = "Green0"
    PURPLE1 = "Purple1"
    PURPLE0 = "Purple0"
    RED1 = "Red1"
    RED0 = "Red0"
    CYAN1 = "Cyan1"
    CYAN0 = "Cyan0"
    YELLOW = "Yellow"
    UNCLASSIFIED = "Unclassified"

    def mirrored(self) -> "DomainLabel":
        """Label of the point reflection through (1/2, 1/2)."""
        return _MIRROR[self]


_MIRROR = {
    DomainLabel.GREEN1: DomainLabel.GREEN0,
    DomainLabel.GREEN0: DomainLabel.GREEN1,
    DomainLabel.PURPLE1: DomainLabel.PURPLE0,
    DomainLabel.PURPLE0: DomainLabel.PURPLE1,
    DomainLabel.RED1: DomainLabel.RED0,
    DomainLabel.RED0: DomainLabel.RED1,
    DomainLabel.CYAN1: DomainLabel.CYAN0,
    DomainLabel.CYAN0: DomainLabel.CYAN1,
    DomainLabel.YELLOW: DomainLabel.YELLOW,
    DomainLabel.UNCLASSIFIED: DomainLabel.UNCLASSIFIED,
}


class YellowLabel(str, Enum):
    A1 = "A1"
    A0 = "A0"
    B1 = "B1"
    B0 = "B0"
    C1 = "C1"
    C0 = "C0"
    OUTSIDE = "OutsideYellowPrime"


@dataclass(frozen=True)
class GridPoint:
    """A pair (x_t, x_{t+1}) of consecutive opinion-1 fractions.

    Simulation paths produce coordinates that are exact multiples of
    1/n; analysis paths may carry arbitrary reals in [0, 1].
    """

    x_t: float
    x_t1: float

    def mirrored(self) -> "GridPoint":
        return GridPoint(1.0 - self.x_t, 1.0 - self.x_t1)

    def on_grid(self, n: int, tol: float = 1e-12) -> bool:
        return (
            abs(self.x_t * n - round(self.x_t * n)) <= tol * n
            and abs(self.x_t1 * n - round(self.x_t1 * n)) <= tol * n
        )


def _coords(point) -> tuple[float, float]:
    if isinstance(point, GridPoint):
        return point.x_t, point.x_t1
    x, y = point
    return float(x), float(y)


def _green1(x: float, y: float, c: AnalysisConstants) -> bool:
    return y >= x + c.delta


def _purple1(x: float, y: float, c: AnalysisConstants) -> bool:
    inv_log = 1.0 / c.log_n
    return (
        inv_log <= x < 0.5 - 3.0 * c.delta
        and (1.0 - c.lambda_n) * x <= y < x + c.delta
    )


def _red1(x: float, y: float, c: AnalysisConstants) -> bool:
    inv_log = 1.0 / c.log_n
    return (
        inv_log <= y
        and x < 0.5 - 3.0 * c.delta
        and x - c.delta <= y < (1.0 - c.lambda_n) * x
    )


def _cyan1(x: float, y: float, c: AnalysisConstants) -> bool:
    inv_log = 1.0 / c.log_n
    return min(x, y) < inv_log and x - c.delta < y < x + c.delta


def _yellow(x: float, y: float, c: AnalysisConstants) -> bool:
    # Typo-corrected x-band: 1/2 - 3d <= x_t <= 1/2 + 3d (see module docstring).
    return (
        0.5 - 3.0 * c.delta <= x <= 0.5 + 3.0 * c.delta
        and 0.5 - 4.0 * c.delta <= y <= 0.5 + 4.0 * c.delta
        and abs(y - x) < c.delta
    )


# Precedence order: Green > Purple > Red > Cyan > Yellow, 1-variant first.
# The 0-variants evaluate the 1-variant predicate at the mirrored point.
_DEFINITIONS = (
    (DomainLabel.GREEN1, _green1, False),
    (DomainLabel.GREEN0, _green1, True),
    (DomainLabel.PURPLE1, _purple1, False),
    (DomainLabel.PURPLE0, _purple1, True),
    (DomainLabel.RED1, _red1, False),
    (DomainLabel.RED0, _red1, True),
    (DomainLabel.CYAN1, _cyan1, False),
    (DomainLabel.CYAN0, _cyan1, True),
    (DomainLabel.YELLOW, _yellow, False),
)


def matching_domains(point, n: int, constants: AnalysisConstants) -> list[DomainLabel]:
    """All domain definitions a point satisfies, in precedence order."""
    x, y = _coords(point)
    out = []
    for label, predicate, mirrored in _DEFINITIONS:
        if predicate(1.0 - x, 1.0 - y, constants) if mirrored else predicate(x, y, constants):
            out.append(label)
    return out


def classify(point, n: int, constants: AnalysisConstants) -> DomainLabel:
    """First matching domain under the fixed precedence, or Unclassified."""
    if constants.n != n:
        raise UsageError(
            f"constants built for n={constants.n}, classify called with n={n}"
        )
    matches = matching_domains(point, n, constants)
    return matches[0] if matches else DomainLabel.UNCLASSIFIED


def in_yellow_prime(point, constants: AnalysisConstants) -> bool:
    """Membership in the square box Yellow' = [1/2-4d, 1/2+4d]^2."""
    x, y = _coords(point)
    lo = 0.5 - 4.0 * constants.delta
    hi = 0.5 + 4.0 * constants.delta
    return lo <= x <= hi and lo <= y <= hi


def classify_yellow(point, constants: AnalysisConstants) -> YellowLabel:
    """A/B/C sub-area of Yellow', with precedence A > B > C, 1-variant first."""
    x, y = _coords(point)
    if not in_yellow_prime(point, constants):
        return YellowLabel.OUTSIDE

    def a1(u: float, v: float) -> bool:
        return v >= 0.5 and (v - u) >= (u - 0.5)

    def b1(u: float, v: float) -> bool:
        return v >= u and (v - u) < (u - 0.5)

    def c1(u: float, v: float) -> bool:
        return v < 0.5 and v >= u

    mx, my = 1.0 - x, 1.0 - y
    for label, hit in (
        (YellowLabel.A1, a1(x, y)),
        (YellowLabel.A0, a1(mx, my)),
        (YellowLabel.B1, b1(x, y)),
        (YellowLabel.B0, b1(mx, my)),
        (YellowLabel.C1, c1(x, y)),
        (YellowLabel.C0, c1(mx, my)),
    ):
        if hit:
            return label
    # The six conditions tile the box; reaching here would be a logic bug.
    raise AssertionError(f"point {(x, y)} in Yellow' matched no A/B/C area")


@dataclass
class PartitionAudit:
    """Exhaustive coverage report over the (n+1)^2 grid.

    ``match_counts`` histograms how many definitions matched per point;
    coordinate lists are integer grid indices (k_x, k_y) with
    fraction = k / n, so the report is exact and deterministic.
    """

    n: int
    delta: float
    c_sample: float
    yellow_reading: str
    total_points: int
    uncovered_count: int
    multiply_covered_count: int
    uncovered: list[tuple[int, int]] = field(repr=False)
    multiply_covered: list[tuple[int, int, int]] = field(repr=False)
    match_counts: dict[int, int] = field(default_factory=dict)
    label_histogram: dict[str, int] = field(default_factory=dict)
    mirror_symmetric: bool = True
    corner_absorbing_label: str = ""
    corner_cyan_label: str = ""

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "c_sample": self.c_sample,
            "yellow_reading": self.yellow_reading,
            "total_points": self.total_points,
            "uncovered_count": self.uncovered_count,
            "multiply_covered_count": self.multiply_covered_count,
            "match_counts": {str(k): v for k, v in sorted(self.match_counts.items())},
            "label_histogram": self.label_histogram,
            "mirror_symmetric": self.mirror_symmetric,
            "corner_absorbing_label": self.corner_absorbing_label,
            "corner_cyan_label": self.corner_cyan_label,
            "uncovered": [list(t) for t in self.uncovered],
            "multiply_covered": [list(t) for t in self.multiply_covered],
        }


YELLOW_READING = (
    "Yellow x-band implemented as 1/2 - 3*delta <= x_t <= 1/2 + 3*delta "
    "(symmetric reading of a typo in the source definition)"
)


def _definition_masks(n: int, constants: AnalysisConstants):
    """Vectorized membership masks over the full grid, per definition."""
    frac = np.arange(n + 1) / n
    x, y = np.meshgrid(frac, frac, indexing="ij")
    d = constants.delta
    lam = constants.lambda_n
    inv_log = 1.0 / constants.log_n

    def green1(u, v):
        return v >= u + d

    def purple1(u, v):
        return (inv_log <= u) & (u < 0.5 - 3 * d) & ((1 - lam) * u <= v) & (v < u + d)

    def red1(u, v):
        return (inv_log <= v) & (u < 0.5 - 3 * d) & (u - d <= v) & (v < (1 - lam) * u)

    def cyan1(u, v):
        return (np.minimum(u, v) < inv_log) & (u - d < v) & (v < u + d)

    def yellow(u, v):
        return (
            (0.5 - 3 * d <= u)
            & (u <= 0.5 + 3 * d)
            & (0.5 - 4 * d <= v)
            & (v <= 0.5 + 4 * d)
            & (np.abs(v - u) < d)
        )

    mx, my = 1.0 - x, 1.0 - y
    masks = [
        (DomainLabel.GREEN1, green1(x, y)),
        (DomainLabel.GREEN0, green1(mx, my)),
        (DomainLabel.PURPLE1, purple1(x, y)),
        (DomainLabel.PURPLE0, purple1(mx, my)),
        (DomainLabel.RED1, red1(x, y)),
        (DomainLabel.RED0, red1(mx, my)),
        (DomainLabel.CYAN1, cyan1(x, y)),
        (DomainLabel.CYAN0, cyan1(mx, my)),
        (DomainLabel.YELLOW, yellow(x, y)),
    ]
    return masks


def audit_partition(n: int, constants: AnalysisConstants) -> PartitionAudit:
    """Enumerate all (n+1)^2 grid points and measure partition coverage.

    Per point, counts how many of the nine domain definitions match
    before precedence, and reports uncovered and multiply-covered
    points with coordinates.  Row computations are independent; the
    implementation is vectorized over the whole grid and merges results
    order-independently.
    """
    if n > 512:
        raise UsageError(f"audit_partition supports n <= 512, got {n}")
    masks = _definition_masks(n, constants)
    counts = np.zeros((n + 1, n + 1), dtype=np.int64)
    for _, mask in masks:
        counts += mask

    # Precedence labelling: first matching definition in order.
    label_idx = np.full((n + 1, n + 1), len(masks), dtype=np.int64)
    for pos in range(len(masks) - 1, -1, -1):
        label_idx[masks[pos][1]] = pos
    names = [label.value for label, _ in masks] + [DomainLabel.UNCLASSIFIED.value]
    histogram = {
        name: int((label_idx == pos).sum()) for pos, name in enumerate(names)
    }

    uncovered_mask = counts == 0
    multi_mask = counts >= 2
    ux, uy = np.nonzero(uncovered_mask)
    mxi, myi = np.nonzero(multi_mask)
    uncovered = [(int(a), int(b)) for a, b in zip(ux, uy)]
    multiply = [
        (int(a), int(b), int(counts[a, b])) for a, b in zip(mxi, myi)
    ]
    # A point is uncovered iff its reflection through the center is.
    mirror_ok = bool(np.array_equal(uncovered_mask, uncovered_mask[::-1, ::-1]))

    values, freq = np.unique(counts, return_counts=True)
    match_counts = {int(v): int(f) for v, f in zip(values, freq)}

    absorbing = classify((1.0, 1.0), n, constants)
    cyan_corner = classify((1.0 / n, 1.0 / n), n, constants)

    return PartitionAudit(
        n=n,
        delta=constants.delta,
        c_sample=constants.c_sample,
        yellow_reading=YELLOW_READING,
        total_points=(n + 1) ** 2,
        uncovered_count=len(uncovered),
        multiply_covered_count=len(multiply),
        uncovered=uncovered,
        multiply_covered=multiply,
        match_counts=match_counts,
        label_histogram=histogram,
        mirror_symmetric=mirror_ok,
        corner_absorbing_label=absorbing.value,
        corner_cyan_label=cyan_corner.value,
    )
