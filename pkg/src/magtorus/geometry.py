"""Rational directions, control regions and their circle projections.

A control region is a finite union of axis-aligned rectangles on the torus,
so projecting it on the transversal of a primitive direction is exact
interval arithmetic.  On top of that sit the two geometric checkers: the
classical condition that every closed geodesic meets the region, and the
magnetic variant demanding that for every periodic direction the projected
region covers all critical points of the averaged tangential potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import (
    CircleFunction,
    CriticalPoint,
    VectorPotential,
    a_gamma,
    critical_points,
)

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class Direction:
    """Primitive integer direction, canonical sign p > 0 or (p, q) = (0, 1)."""

    p: int
    q: int

    def __post_init__(self):
        p, q = self.p, self.q
        if (p, q) == (0, 0) or math.gcd(abs(p), abs(q)) != 1:
            raise ValueError(f"({p}, {q}) is not primitive")
        if p < 0 or (p == 0 and q < 0):
            raise ValueError(f"({p}, {q}) is not in canonical form")

    @classmethod
    def canonical(cls, p: int, q: int) -> "Direction":
        g = math.gcd(abs(p), abs(q))
        if g == 0:
            raise ValueError("zero direction")
        p, q = p // g, q // g
        if p < 0 or (p == 0 and q < 0):
            p, q = -p, -q
        return cls(p, q)

    @property
    def norm(self) -> float:
        return math.hypot(self.p, self.q)

    @property
    def gamma(self) -> np.ndarray:
        return np.array([self.p, self.q]) / self.norm

    @property
    def gamma_perp(self) -> np.ndarray:
        return np.array([-self.q, self.p]) / self.norm

    @property
    def transversal_circumference(self) -> float:
        return TWO_PI / self.norm

    def as_tuple(self) -> tuple[int, int]:
        return (self.p, self.q)


@dataclass
class Region:
    """Union of axis-aligned rectangles [x0,x1]x[y0,y1] inside [0, 2π]^2."""

    rects: list

    def __post_init__(self):
        if not self.rects:
            raise ValueError("region must be nonempty")
        clean = []
        for r in self.rects:
            x0, x1, y0, y1 = map(float, r)
            if not (0 <= x0 < x1 <= TWO_PI and 0 <= y0 < y1 <= TWO_PI):
                raise ValueError(f"invalid rectangle {r}")
            clean.append((x0, x1, y0, y1))
        self.rects = clean

    @classmethod
    def full_torus(cls) -> "Region":
        return cls([(0.0, TWO_PI, 0.0, TWO_PI)])

    @classmethod
    def horizontal_strip(cls, y0: float, y1: float) -> "Region":
        """T_x x (y0, y1); a strip crossing 0 is split into two rectangles."""
        y0, y1 = y0 % TWO_PI, y1 % TWO_PI
        if y0 < y1:
            return cls([(0.0, TWO_PI, y0, y1)])
        return cls([(0.0, TWO_PI, y0, TWO_PI), (0.0, TWO_PI, 0.0, y1)])

    def area(self) -> float:
        return sum((x1 - x0) * (y1 - y0) for x0, x1, y0, y1 in self.rects)

    def contains_point(self, x: float, y: float) -> bool:
        x, y = x % TWO_PI, y % TWO_PI
        return any(x0 <= x <= x1 and y0 <= y <= y1 for x0, x1, y0, y1 in self.rects)

    def to_json(self) -> dict:
        return {"rects": [list(r) for r in self.rects]}

    @classmethod
    def from_json(cls, obj: dict) -> "Region":
        return cls([tuple(r) for r in obj["rects"]])


@dataclass
class ArcSet:
    """Disjoint sorted half-open arcs [a, b) on a circle of length ell."""

    ell: float
    arcs: list
    full: bool = False

    @classmethod
    def from_arcs(cls, ell: float, raw: list) -> "ArcSet":
        """Normalize raw (start, length) pairs: reduce mod ell, merge overlaps."""
        if ell <= 0:
            raise ValueError("circumference must be positive")
        pieces = []
        for a, length in raw:
            if length <= 0:
                continue
            if length >= ell - 1e-14:
                return cls(ell, [(0.0, ell)], full=True)
            a = a % ell
            if a + length <= ell:
                pieces.append((a, a + length))
            else:
                pieces.append((a, ell))
                pieces.append((0.0, a + length - ell))
        pieces.sort()
        merged: list = []
        for a, b in pieces:
            if merged and a <= merged[-1][1] + 1e-14:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        # wraparound merge
        if len(merged) > 1 and merged[0][0] <= 1e-14 and merged[-1][1] >= ell - 1e-14:
            a0, b0 = merged.pop(0)
            a1, b1 = merged.pop()
            merged.append((a1, ell))
            merged.insert(0, (0.0, b0))
        total = sum(b - a for a, b in merged)
        if total >= ell - 1e-12:
            return cls(ell, [(0.0, ell)], full=True)
        return cls(ell, merged, full=False)

    @classmethod
    def full_circle(cls, ell: float) -> "ArcSet":
        return cls(ell, [(0.0, ell)], full=True)

    def total_length(self) -> float:
        return self.ell if self.full else sum(b - a for a, b in self.arcs)

    def _unrolled(self) -> list:
        """Arcs replicated to [-ell, 2ell] and re-merged, so that arcs glued
        across 0 become genuine intervals around the seam."""
        pieces = sorted(
            (a + shift, b + shift)
            for a, b in self.arcs
            for shift in (-self.ell, 0.0, self.ell)
        )
        merged: list = []
        for a, b in pieces:
            if merged and a <= merged[-1][1] + 1e-14:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return merged

    def contains(self, s: float, margin: float = 0.0) -> bool:
        """True if s lies in the set at distance >= margin from its boundary."""
        if self.full:
            return True
        s = s % self.ell
        return any(a + margin <= s <= b - margin for a, b in self._unrolled())

    def distance(self, s: float) -> float:
        """Circle distance from s to the set (0 if inside)."""
        if self.full:
            return 0.0
        s = s % self.ell
        best = self.ell
        for a, b in self._unrolled():
            if a <= s <= b:
                return 0.0
            best = min(best, abs(s - a), abs(s - b))
        return best

    def boundary_distance(self, s: float) -> float:
        """Circle distance from s to the nearest arc endpoint."""
        if self.full:
            return self.ell
        s = s % self.ell
        best = self.ell
        for a, b in self._unrolled():
            best = min(best, abs(s - a), abs(s - b))
        return best

    def largest_gap_midpoint(self) -> float:
        """Midpoint of the longest complementary arc (set must not be full)."""
        if self.full:
            raise ValueError("no gap: set covers the circle")
        if not self.arcs:
            return 0.0
        best_len, best_mid = -1.0, 0.0
        n = len(self.arcs)
        for i in range(n):
            b = self.arcs[i][1]
            a_next = self.arcs[(i + 1) % n][0] + (self.ell if i == n - 1 else 0.0)
            gap = a_next - b
            if gap > best_len:
                best_len, best_mid = gap, (b + a_next) / 2 % self.ell
        return best_mid


def inscribed_square(region: Region) -> tuple[tuple[float, float], float]:
    """Center and half-side of the largest axis-aligned square in one rectangle."""
    best = None
    for x0, x1, y0, y1 in region.rects:
        delta = min((x1 - x0) / 2, (y1 - y0) / 2)
        if best is None or delta > best[1]:
            best = (((x0 + x1) / 2, (y0 + y1) / 2), delta)
    return best


def direction_cutoff(region: Region) -> int:
    """Bound p0 such that every direction with max(|p|,|q|) >= p0 projects fully.

    A square of half-side δ inside the region meets every closed geodesic of
    a long enough periodic direction; on the 2π-torus p0 = ceil(2π/δ) + 1.
    """
    _, delta = inscribed_square(region)
    return int(math.ceil(TWO_PI / delta)) + 1


def enumerate_directions(p0: int) -> list[Direction]:
    """All canonical primitive directions with max(|p|, |q|) < p0."""
    if p0 < 1:
        raise ValueError("p0 must be >= 1")
    out = []
    for p in range(0, p0):
        for q in range(-p0 + 1, p0):
            if (p, q) == (0, 0) or (p == 0 and q != 1):
                continue
            if p < 0 or math.gcd(abs(p), abs(q)) != 1:
                continue
            out.append(Direction(p, q))
    return out


def project_region(region: Region, direction: Direction) -> ArcSet:
    """Projection of the region on the γ⊥ axis, as arcs mod ℓ = 2π/|(p,q)|."""
    ell = direction.transversal_circumference
    gp = direction.gamma_perp
    raw = []
    for x0, x1, y0, y1 in region.rects:
        corners = [np.dot(gp, (x, y)) for x in (x0, x1) for y in (y0, y1)]
        lo, hi = min(corners), max(corners)
        raw.append((lo, hi - lo))
    return ArcSet.from_arcs(ell, raw)


@dataclass
class GccReport:
    holds: bool
    offenders: list  # (Direction, geodesic offset s on the transversal circle)
    cutoff: int


def gcc_check(region: Region) -> GccReport:
    """Does every closed geodesic with periodic direction meet the region?"""
    p0 = direction_cutoff(region)
    offenders = []
    for d in enumerate_directions(p0):
        proj = project_region(region, d)
        if not proj.full:
            offenders.append((d, proj.largest_gap_midpoint()))
    return GccReport(holds=not offenders, offenders=offenders, cutoff=p0)


@dataclass
class DirectionVerdict:
    direction: Direction
    verdict: str  # satisfied | violated | boundary-case | auto-satisfied-beyond-cutoff
    a_gamma: CircleFunction | None = None
    crit_points: list = dc_field(default_factory=list)
    projection: ArcSet | None = None
    constant_tangential: bool = False


@dataclass
class MgccReport:
    verdict: str
    per_direction: list
    cutoff: int

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "cutoff": self.cutoff,
            "directions": [
                {
                    "p": v.direction.p,
                    "q": v.direction.q,
                    "verdict": v.verdict,
                    "constant": v.constant_tangential,
                    "n_crit": len(v.crit_points),
                    "crit_points": [c.position for c in v.crit_points],
                    "ell": v.direction.transversal_circumference,
                    "covered": v.projection.full if v.projection else None,
                }
                for v in self.per_direction
            ],
        }

    def csv_rows(self) -> list:
        rows = [("p", "q", "verdict", "n_crit", "covered", "ell")]
        for v in self.per_direction:
            rows.append((
                v.direction.p, v.direction.q, v.verdict, len(v.crit_points),
                v.projection.full if v.projection else "",
                f"{v.direction.transversal_circumference:.12g}",
            ))
        return rows


def _combine(verdicts: list) -> str:
    if any(v == "violated" for v in verdicts):
        return "violated"
    if any(v == "boundary-case" for v in verdicts):
        return "boundary-case"
    return "satisfied"


def _direction_verdict(A: VectorPotential, region: Region, d: Direction,
                       tol: float) -> DirectionVerdict:
    ag = a_gamma(A, d)
    proj = project_region(region, d)
    if ag.is_constant():
        verdict = "satisfied" if proj.full else "violated"
        return DirectionVerdict(d, verdict, ag, [], proj, constant_tangential=True)
    pts = critical_points(ag)
    verdict = "satisfied"
    for c in pts:
        if proj.contains(c.position, margin=tol):
            continue
        if proj.boundary_distance(c.position) < tol:
            verdict = "boundary-case"
        else:
            verdict = "violated"
            break
    return DirectionVerdict(d, verdict, ag, pts, proj)


def mgcc_check(A: VectorPotential, region: Region, tol: float = 1e-6,
               verify_beyond_cutoff: bool = False) -> MgccReport:
    """Check that every periodic direction's projection covers the critical
    points of the averaged tangential potential.

    Directions at or beyond the cutoff are auto-satisfied (their projections
    cover the whole circle); pass verify_beyond_cutoff to audit the ring of
    directions at the cutoff explicitly.
    """
    p0 = direction_cutoff(region)
    per = [_direction_verdict(A, region, d, tol) for d in enumerate_directions(p0)]
    if verify_beyond_cutoff:
        ring = [d for d in enumerate_directions(p0 + 1)
                if max(abs(d.p), abs(d.q)) == p0]
        for d in ring:
            proj = project_region(region, d)
            if not proj.full:
                raise AssertionError(
                    f"cutoff guarantee failed at direction {d.as_tuple()}")
            per.append(DirectionVerdict(d, "auto-satisfied-beyond-cutoff",
                                        projection=proj))
    return MgccReport(_combine([v.verdict for v in per
                                if v.verdict != "auto-satisfied-beyond-cutoff"]),
                      per, p0)


@dataclass
class Witness:
    direction: Direction
    critical_point: CriticalPoint
    geodesic_offset: float


@dataclass
class WitnessResult:
    witness: Witness | None
    degenerate_only: bool = False


def optimality_witness(A: VectorPotential, region: Region,
                       tol: float = 1e-6) -> WitnessResult:
    """Search for a direction carrying both a geodesic avoiding the region and
    a non-degenerate critical point of the tangential average outside it.

    Such a pair certifies failure of observability; none exists when the
    magnetic coverage condition holds.
    """
    saw_degenerate_only = False
    p0 = direction_cutoff(region)
    for d in enumerate_directions(p0):
        proj = project_region(region, d)
        if proj.full:
            continue
        ag = a_gamma(A, d)
        if ag.is_constant():
            continue
        outside = [c for c in critical_points(ag) if proj.distance(c.position) >= tol]
        if not outside:
            continue
        nondeg = [c for c in outside if not c.degenerate]
        if not nondeg:
            saw_degenerate_only = True
            continue
        crit = nondeg[0]
        # a geodesic avoiding the region: prefer one through the critical point
        offset = crit.position
        if proj.distance(offset) < tol:
            offset = proj.largest_gap_midpoint()
        return WitnessResult(Witness(d, crit, offset))
    return WitnessResult(None, degenerate_only=saw_degenerate_only)
