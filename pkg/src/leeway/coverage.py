"""Offline waypoint generation for lake and river surveys.

Lakes are swept with parallel lanes (boustrophedon). Rivers are modelled as a
constant-width corridor around a centerline polyline and covered with lanes
parallel to the centerline (L), transects across it (T) or a single zig-zag
pass between the banks (Z). Multi-robot plans either split a single-robot
lane sequence into contiguous runs or split the area into bands first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Polygon, box
from shapely.validation import explain_validity

from .geo import DomainError, LocalPoint, distance, rotate
from .mission import Mission, Waypoint

Lane = tuple[LocalPoint, ...]

PATTERNS = ("boustrophedon", "L", "T", "Z", "star")
EXHAUSTIVE_ASSIGNMENT_MAX_K = 6
# band cuts are searched exhaustively up to this many combinations
_BAND_EXHAUSTIVE_LIMIT = 20000
# up to this many lanes every visiting order is tried (7! orders, exact directions)
EXACT_ORDER_MAX_LANES = 7


@dataclass(frozen=True)
class LakeRegion:
    boundary: tuple[LocalPoint, ...]

    def __post_init__(self) -> None:
        pts = tuple(p if isinstance(p, LocalPoint) else LocalPoint(*p) for p in self.boundary)
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            raise DomainError("lake polygon needs at least 3 vertices")
        poly = Polygon([(p.x, p.y) for p in pts])
        if not poly.is_valid:
            raise DomainError(f"invalid lake polygon: {explain_validity(poly)}")
        if poly.area <= 0:
            raise DomainError("lake polygon has zero area")
        if not poly.exterior.is_ccw:
            pts = tuple(reversed(pts))
        object.__setattr__(self, "boundary", pts)

    @property
    def polygon(self) -> Polygon:
        return Polygon([(p.x, p.y) for p in self.boundary])


@dataclass(frozen=True)
class RiverCorridor:
    centerline: tuple[LocalPoint, ...]
    width: float

    def __post_init__(self) -> None:
        pts = tuple(p if isinstance(p, LocalPoint) else LocalPoint(*p) for p in self.centerline)
        if len(pts) < 2:
            raise DomainError("centerline needs at least 2 vertices")
        for a, b in zip(pts, pts[1:]):
            if distance(a, b) <= 1e-9:
                raise DomainError("consecutive centerline vertices coincide")
        if not (math.isfinite(self.width) and self.width > 0):
            raise DomainError("corridor width must be > 0")
        object.__setattr__(self, "centerline", pts)

    @property
    def length(self) -> float:
        return sum(distance(a, b) for a, b in zip(self.centerline, self.centerline[1:]))

    def station(self, s: float) -> tuple[LocalPoint, tuple[float, float]]:
        """Centerline point and unit tangent at arclength ``s``."""
        pts = self.centerline
        s = min(max(s, 0.0), self.length)
        for a, b in zip(pts, pts[1:]):
            seg = distance(a, b)
            if s <= seg + 1e-12 or b is pts[-1]:
                t = ((b.x - a.x) / seg, (b.y - a.y) / seg)
                u = min(s, seg)
                return LocalPoint(a.x + t[0] * u, a.y + t[1] * u), t
            s -= seg
        raise AssertionError("unreachable")

    def offset_polyline(self, d: float) -> Lane:
        """Parallel of the centerline at signed offset ``d`` (positive = left)."""
        pts = self.centerline
        normals = []
        for a, b in zip(pts, pts[1:]):
            seg = distance(a, b)
            normals.append((-(b.y - a.y) / seg, (b.x - a.x) / seg))
        out = []
        for i, p in enumerate(pts):
            if i == 0:
                n = normals[0]
            elif i == len(pts) - 1:
                n = normals[-1]
            else:
                n0, n1 = normals[i - 1], normals[i]
                mx, my = n0[0] + n1[0], n0[1] + n1[1]
                norm = math.hypot(mx, my)
                if norm < 1e-9:
                    n = n1
                else:
                    # miter join, limited so hairpins stay bounded
                    mx, my = mx / norm, my / norm
                    cos_half = max(mx * n1[0] + my * n1[1], 0.25)
                    n = (mx / cos_half, my / cos_half)
            out.append(LocalPoint(p.x + n[0] * d, p.y + n[1] * d))
        return tuple(out)


@dataclass(frozen=True)
class CoveragePlan:
    """Per-robot lane sequences.

    ``robots[i]`` is the ordered lanes of robot ``i``; each lane is a
    polyline driven from its first to its last point, and consecutive lanes
    are joined by a straight connector.
    """

    robots: tuple[tuple[Lane, ...], ...]
    pattern: str
    lane_spacing: float
    speed: float = 3.0
    warnings: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.pattern not in PATTERNS:
            raise DomainError(f"unknown pattern {self.pattern!r}")
        if not self.robots or any(len(r) == 0 for r in self.robots):
            raise DomainError("every robot needs at least one lane")

    @property
    def lanes(self) -> list[list[LocalPoint]]:
        """Flattened waypoint sequence for each robot."""
        out = []
        for lanes in self.robots:
            seq: list[LocalPoint] = []
            for lane in lanes:
                for p in lane:
                    if not seq or distance(seq[-1], p) > 1e-9:
                        seq.append(p)
            out.append(seq)
        return out

    def all_lanes(self) -> list[Lane]:
        return [lane for lanes in self.robots for lane in lanes]

    def turn_count(self) -> int:
        """Lane-to-lane transitions summed over robots."""
        return sum(len(r) - 1 for r in self.robots)

    def to_missions(self, acceptance_radius: float = 3.0) -> list[Mission]:
        missions = []
        for seq in self.lanes:
            wps = seq[1:] if len(seq) > 1 else seq
            missions.append(Mission(seq[0], tuple(Waypoint(p, self.speed) for p in wps),
                                    acceptance_radius))
        return missions


def lane_length(lane: Lane) -> float:
    return sum(distance(a, b) for a, b in zip(lane, lane[1:]))


def _reverse(lane: Lane) -> Lane:
    return tuple(reversed(lane))


def _rot(p: LocalPoint, theta: float) -> LocalPoint:
    return LocalPoint(*rotate(p.x, p.y, theta))


# ---------------------------------------------------------------------------
# lakes


def _sweep_rows(region: LakeRegion, spacing: float, orientation: float) -> list[list[Lane]]:
    """Lane segments grouped by sweep line, in increasing sweep order.

    Lanes run along ``orientation`` at exact ``spacing``. Each lane spans the
    extent of its swath band (the strip of width ``spacing`` around it)
    intersected with the region, so slanted edges are covered to the
    boundary; a band split by the shoreline yields one lane per piece.
    """
    if not (math.isfinite(spacing) and spacing > 0):
        raise DomainError("spacing must be > 0")
    local = [_rot(p, -orientation) for p in region.boundary]
    poly = Polygon([(p.x, p.y) for p in local])
    xmin, ymin, xmax, ymax = poly.bounds
    extent = ymax - ymin
    if spacing >= extent:
        bands = [(ymin, ymax, 0.5 * (ymin + ymax))]
    else:
        n = int(math.ceil(extent / spacing - 1e-9))
        bands = [(ymin + k * spacing, ymin + (k + 1) * spacing, ymin + (k + 0.5) * spacing)
                 for k in range(n)]
    rows = []
    for lo_y, hi_y, y in bands:
        strip = box(xmin - 1.0, lo_y, xmax + 1.0, hi_y)
        inter = poly.intersection(strip)
        parts = getattr(inter, "geoms", [inter])
        segs = sorted((g.bounds[0], g.bounds[2]) for g in parts
                      if g.geom_type == "Polygon" and g.area > 1e-9)
        row = [(_rot(LocalPoint(lo, y), orientation), _rot(LocalPoint(hi, y), orientation))
               for lo, hi in segs if hi - lo > 1e-9]
        if row:
            rows.append(row)
    return rows


def _serpentine(rows: Sequence[Sequence[Lane]], first_forward: bool = True) -> list[Lane]:
    out = []
    for i, row in enumerate(rows):
        forward = (i % 2 == 0) == first_forward
        segs = list(row) if forward else [_reverse(s) for s in reversed(row)]
        out.extend(segs)
    return out


def boustrophedon(region: LakeRegion, spacing: float, orientation: float = 0.0,
                  speed: float = 3.0) -> CoveragePlan:
    """Serpentine sweep of parallel lanes at ``orientation`` (radians CCW from east)."""
    rows = _sweep_rows(region, spacing, orientation)
    if not rows:
        raise DomainError("region produced no sweep lanes")
    return CoveragePlan((tuple(_serpentine(rows)),), "boustrophedon", spacing, speed)


# ---------------------------------------------------------------------------
# rivers


def l_cover(corridor: RiverCorridor, spacing: float, speed: float = 3.0) -> CoveragePlan:
    """Lanes parallel to the centerline, joined at the corridor ends."""
    if not (math.isfinite(spacing) and spacing > 0):
        raise DomainError("spacing must be > 0")
    warnings = ()
    if spacing > corridor.width:
        offsets = [0.0]
        warnings = ("spacing exceeds width; single centerline lane",)
    else:
        n = int(math.ceil(corridor.width / spacing - 1e-9))
        offsets = [(k - (n - 1) / 2.0) * spacing for k in range(n)]
    lanes = []
    for k, d in enumerate(offsets):
        lane = corridor.offset_polyline(d)
        lanes.append(lane if k % 2 == 0 else _reverse(lane))
    return CoveragePlan((tuple(lanes),), "L", spacing, speed, warnings)


def _stations(length: float, step: float) -> list[float]:
    n = int(math.floor(length / step + 1e-9))
    s = [k * step for k in range(n + 1)]
    if length - s[-1] > 1e-9:
        s.append(length)
    return s


def t_cover(corridor: RiverCorridor, spacing: float, speed: float = 3.0) -> CoveragePlan:
    """Full-width transects every ``spacing`` meters of centerline arclength."""
    if not (math.isfinite(spacing) and spacing > 0):
        raise DomainError("spacing must be > 0")
    half = corridor.width / 2.0
    lanes = []
    for k, s in enumerate(_stations(corridor.length, spacing)):
        c, (tx, ty) = corridor.station(s)
        left = LocalPoint(c.x - ty * half, c.y + tx * half)
        right = LocalPoint(c.x + ty * half, c.y - tx * half)
        lanes.append((right, left) if k % 2 == 0 else (left, right))
    return CoveragePlan((tuple(lanes),), "T", spacing, speed)


def z_cover(corridor: RiverCorridor, along_spacing: float, speed: float = 3.0) -> CoveragePlan:
    """One downstream pass touching alternate banks every ``along_spacing`` meters."""
    if not (math.isfinite(along_spacing) and along_spacing > 0):
        raise DomainError("along_spacing must be > 0")
    half = corridor.width / 2.0
    pts = []
    for k, s in enumerate(_stations(corridor.length, along_spacing)):
        c, (tx, ty) = corridor.station(s)
        side = 1.0 if k % 2 == 0 else -1.0
        pts.append(LocalPoint(c.x - ty * half * side, c.y + tx * half * side))
    return CoveragePlan(((tuple(pts),),), "Z", along_spacing, speed)


# ---------------------------------------------------------------------------
# multi-robot


def _run_cost(lanes: Sequence[Lane]) -> float:
    cost = sum(lane_length(l) for l in lanes)
    cost += sum(distance(a[-1], b[0]) for a, b in zip(lanes, lanes[1:]))
    return cost


def split_path(plan: CoveragePlan, k: int) -> CoveragePlan:
    """Cut a single-robot lane sequence into ``k`` contiguous runs.

    Exact min-max dynamic programme over lane boundaries; a run's cost is its
    lane lengths plus the connectors inside it.
    """
    if len(plan.robots) != 1:
        raise DomainError("split_path expects a single-robot plan")
    if k < 1:
        raise DomainError("k must be >= 1")
    lanes = list(plan.robots[0])
    m = len(lanes)
    warnings = list(plan.warnings)
    if k > m:
        warnings.append(f"k reduced from {k} to {m} (lane count)")
        k = m
    lengths = [lane_length(l) for l in lanes]
    links = [distance(a[-1], b[0]) for a, b in zip(lanes, lanes[1:])]
    prefix = np.concatenate([[0.0], np.cumsum(lengths)])
    lprefix = np.concatenate([[0.0], np.cumsum(links)])

    def cost(i: int, j: int) -> float:
        # lanes i..j-1
        return float(prefix[j] - prefix[i] + lprefix[j - 1] - lprefix[i])

    inf = math.inf
    best = [[inf] * (m + 1) for _ in range(k + 1)]
    cut = [[0] * (m + 1) for _ in range(k + 1)]
    best[0][0] = 0.0
    for r in range(1, k + 1):
        for j in range(r, m + 1):
            for i in range(r - 1, j):
                v = max(best[r - 1][i], cost(i, j))
                if v < best[r][j] - 1e-12:
                    best[r][j] = v
                    cut[r][j] = i
    bounds = [m]
    for r in range(k, 0, -1):
        bounds.append(cut[r][bounds[-1]])
    bounds.reverse()
    robots = tuple(tuple(lanes[a:b]) for a, b in zip(bounds, bounds[1:]))
    return CoveragePlan(robots, plan.pattern, plan.lane_spacing, plan.speed,
                        tuple(warnings), dict(plan.metadata))


def max_run_cost(plan: CoveragePlan) -> float:
    return max(_run_cost(r) for r in plan.robots)


def _balanced_bands(weights: Sequence[float], k: int) -> list[tuple[int, int]]:
    """Contiguous bands whose weights are as equal as possible.

    Exhaustive over cut positions when that is cheap, otherwise cuts at the
    nearest equal-share boundaries refined by single-cut moves.
    """
    total = float(sum(weights))
    cum = np.concatenate([[0.0], np.cumsum(weights)])
    m = len(weights)

    def key(cuts):
        loads = np.diff(cum[[0, *cuts, m]])
        return (float(loads.max() - loads.min()), float(loads.max()), tuple(cuts))

    if math.comb(m - 1, k - 1) <= _BAND_EXHAUSTIVE_LIMIT:
        best = min((list(c) for c in itertools.combinations(range(1, m), k - 1)), key=key)
    else:
        best = []
        for j in range(1, k):
            target = total * j / k
            lo = (best[-1] if best else 0) + 1
            hi = m - (k - j)
            best.append(min(range(lo, hi + 1), key=lambda i: (abs(cum[i] - target), i)))
        improved = True
        while improved:
            improved = False
            for j in range(k - 1):
                for step in (-1, 1):
                    cand = best.copy()
                    cand[j] += step
                    lo = cand[j - 1] if j else 0
                    hi = cand[j + 1] if j + 1 < k - 1 else m
                    if lo < cand[j] < hi and key(cand) < key(best):
                        best, improved = cand, True
    cuts = [0, *best, m]
    return list(zip(cuts, cuts[1:]))


def _band_entries(rows: Sequence[Sequence[Lane]]) -> list[tuple[LocalPoint, bool, bool]]:
    """Candidate entry points of a band: (point, from_first_row, forward)."""
    first, last = rows[0], rows[-1]
    return [
        (first[0][0], True, True),
        (first[-1][-1], True, False),
        (last[0][0], False, True),
        (last[-1][-1], False, False),
    ]


def _entry_distance(start: LocalPoint, rows) -> float:
    return min(distance(start, p) for p, _, _ in _band_entries(rows))


def partition_area(region: LakeRegion, k: int, starts: Sequence[LocalPoint],
                   spacing: float, orientation: float = 0.0,
                   speed: float = 3.0) -> CoveragePlan:
    """Split the sweep into ``k`` balanced bands, one per robot.

    Bands are assigned to robots to minimise the summed start-to-entry
    distance (exhaustively for k <= 6, nearest-first otherwise), and each
    band is swept serpentine from its nearest entry.
    """
    if k < 1 or len(starts) != k:
        raise DomainError("need k >= 1 and exactly one start per robot")
    rows = _sweep_rows(region, spacing, orientation)
    if not rows:
        raise DomainError("region produced no sweep lanes")
    warnings = []
    if k > len(rows):
        warnings.append(f"k reduced from {k} to {len(rows)} (lane count)")
        k = len(rows)
        starts = list(starts)[:k]
    weights = [sum(lane_length(s) for s in row) for row in rows]
    bands = [rows[a:b] for a, b in _balanced_bands(weights, k)]
    assignment = assign_bands(bands, starts)

    robots = []
    for r in range(k):
        band = bands[assignment[r]]
        p, from_first, forward = min(_band_entries(band), key=lambda e: distance(starts[r], e[0]))
        ordered = list(band) if from_first else list(reversed(band))
        robots.append(tuple(_serpentine(ordered, forward)))
    meta = {"assignment": list(assignment),
            "band_lengths": [sum(weights[i] for i in range(a, b))
                             for a, b in _balanced_bands(weights, k)]}
    return CoveragePlan(tuple(robots), "boustrophedon", spacing, speed, tuple(warnings), meta)


def assign_bands(bands, starts: Sequence[LocalPoint]) -> tuple[int, ...]:
    """``result[robot] = band index`` minimising total entry distance."""
    k = len(bands)
    d = [[_entry_distance(starts[r], bands[b]) for b in range(k)] for r in range(k)]
    if k <= EXHAUSTIVE_ASSIGNMENT_MAX_K:
        best, best_cost = None, math.inf
        for perm in itertools.permutations(range(k)):
            c = sum(d[r][perm[r]] for r in range(k))
            if c < best_cost - 1e-9:
                best, best_cost = perm, c
        return tuple(best)
    # greedy fallback: not optimal in general
    free = set(range(k))
    out = []
    for r in range(k):
        b = min(sorted(free), key=lambda j: d[r][j])
        free.remove(b)
        out.append(b)
    return tuple(out)


# ---------------------------------------------------------------------------
# lane ordering


Tour = list[tuple[int, bool]]


def _ends(lane: Lane, forward: bool) -> tuple[LocalPoint, LocalPoint]:
    return (lane[0], lane[-1]) if forward else (lane[-1], lane[0])


def tour_cost(lanes: Sequence[Lane], tour: Tour, start: LocalPoint) -> float:
    """Transition distance of driving ``tour`` from ``start`` (lane lengths excluded)."""
    pos = start
    total = 0.0
    for i, fwd in tour:
        a, b = _ends(lanes[i], fwd)
        total += distance(pos, a)
        pos = b
    return total


def nearest_neighbor_tour(lanes: Sequence[Lane], start: LocalPoint) -> Tour:
    free = list(range(len(lanes)))
    pos = start
    tour = []
    while free:
        best = None
        for i in free:
            for fwd in (True, False):
                a, b = _ends(lanes[i], fwd)
                key = (distance(pos, a), i, not fwd)
                if best is None or key < best[0]:
                    best = (key, i, fwd, b)
        _, i, fwd, pos = best
        free.remove(i)
        tour.append((i, fwd))
    return tour


def best_directions(lanes: Sequence[Lane], order: Sequence[int], start: LocalPoint) -> Tour:
    """Optimal driving direction of every lane for a fixed visiting order.

    Two-state dynamic programme over the order (exact).
    """
    if not order:
        return []
    # cost[f]: best cost so far ending with the current lane driven forward=f
    first = lanes[order[0]]
    cost = {f: distance(start, _ends(first, f)[0]) for f in (True, False)}
    back: list[dict] = []
    for prev, cur in zip(order, order[1:]):
        new, choice = {}, {}
        for f in (True, False):
            entry = _ends(lanes[cur], f)[0]
            opts = [(cost[g] + distance(_ends(lanes[prev], g)[1], entry), not g, g)
                    for g in (True, False)]
            c, _, g = min(opts)
            new[f], choice[f] = c, g
        cost = new
        back.append(choice)
    f = min((True, False), key=lambda x: (cost[x], not x))
    dirs = [f]
    for choice in reversed(back):
        f = choice[f]
        dirs.append(f)
    dirs.reverse()
    return list(zip(order, dirs))


def two_opt(lanes: Sequence[Lane], tour: Tour, start: LocalPoint) -> Tour:
    """Local search over the visiting order until no move improves the tour.

    Moves are 2-opt segment reversals and relocation of any contiguous block
    of lanes. After every move, lane directions are re-optimised exactly for
    the new order, so direction choices never trap the search. First
    improvement in a fixed scan order keeps the result deterministic.
    """
    order = [i for i, _ in tour]
    tour = list(tour)
    cost = tour_cost(lanes, tour, start)
    best = best_directions(lanes, order, start)
    if tour_cost(lanes, best, start) < cost - 1e-9:
        tour, cost = best, tour_cost(lanes, best, start)
    n = len(order)

    def moves(o: list[int]):
        for i in range(n):
            for j in range(i + 1, n):
                yield o[:i] + o[i:j + 1][::-1] + o[j + 1:]
        for i in range(n):
            for j in range(i, n):
                block = o[i:j + 1]
                rest = o[:i] + o[j + 1:]
                for pos in range(len(rest) + 1):
                    if pos != i:
                        yield rest[:pos] + block + rest[pos:]

    improved = True
    while improved:
        improved = False
        for cand in moves(order):
            t = best_directions(lanes, cand, start)
            c = tour_cost(lanes, t, start)
            if c < cost - 1e-9:
                order, tour, cost, improved = cand, t, c, True
                break
    return tour


def exact_tour(lanes: Sequence[Lane], start: LocalPoint) -> Tour:
    """Minimum-transition tour over every order, directions solved exactly."""
    best, best_cost = None, math.inf
    for order in itertools.permutations(range(len(lanes))):
        t = best_directions(lanes, order, start)
        c = tour_cost(lanes, t, start)
        if c < best_cost - 1e-9:
            best, best_cost = t, c
    return best


def order_tour(lanes: Sequence[Lane], start: LocalPoint) -> Tour:
    if not lanes:
        raise DomainError("order_lanes needs at least one lane")
    nn = nearest_neighbor_tour(lanes, start)
    tour = two_opt(lanes, nn, start)
    if len(lanes) <= EXACT_ORDER_MAX_LANES:
        exact = exact_tour(lanes, start)
        if tour_cost(lanes, exact, start) < tour_cost(lanes, tour, start) - 1e-9:
            tour = exact
    return tour


def order_lanes(lanes: Sequence[Lane], start: LocalPoint) -> list[Lane]:
    """Visiting order and direction of ``lanes`` from ``start``.

    Nearest-neighbour construction followed by local search; small lane sets
    are additionally solved exactly, so the result is optimal for up to
    ``EXACT_ORDER_MAX_LANES`` lanes and never worse than nearest neighbour.
    """
    tour = order_tour(lanes, start)
    return [lanes[i] if f else _reverse(lanes[i]) for i, f in tour]


# ---------------------------------------------------------------------------
# test pattern


def star_pattern(center: LocalPoint, radius: float, speed: float = 3.0,
                 acceptance_radius: float = 3.0, headings_deg: Optional[Sequence[float]] = None,
                 ) -> list[Mission]:
    """Eight out-and-back missions at 45 degree increments around ``center``.

    Headings are measured CCW from east in the local frame.
    """
    if not (math.isfinite(radius) and radius > 0):
        raise DomainError("radius must be > 0")
    if headings_deg is None:
        headings_deg = [45.0 * i for i in range(8)]
    missions = []
    for deg in headings_deg:
        th = math.radians(deg)
        end = LocalPoint(center.x + radius * math.cos(th), center.y + radius * math.sin(th))
        missions.append(Mission(center, (Waypoint(end, speed), Waypoint(center, speed)),
                                acceptance_radius, metadata={"heading_deg": deg}))
    return missions
