"""Optimal strut cutting at lattice nodes.

Two layers live here:

* the pairwise minimum cutting length for two cylinders meeting at a node,
  ``d = (r_other + r_cut * cos(alpha)) / sin(alpha)``, with the acute-angle
  rule (only the smaller-radius strut needs a cut when alpha < 90 deg);
* the per-node priority-queue procedure that trims the deepest-intersected
  strut first and propagates *reduced* requirements to the remaining struts,
  so interrelated struts are cut less than their naive maxima.

Because both strut axes pass through the node, cylinder-cylinder disjointness
is exactly equivalent to disjointness of two half-strips in the plane spanned
by the two axes. The reduced requirement given an already-committed cut on the
partner is therefore an exact 2D computation: maximize the along-axis
coordinate over a small convex polygon (vertex enumeration of at most five
half-plane constraints). Contact of measure zero counts as disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CornerCaseError, DegenerateAngleError, GraphError
from .geometry import angle_between, unit
from .graph import LatticeGraph, strut_direction

ANGLE_EPS = 1e-6          # rad; closer than this to 0 or pi is degenerate
MIN_REMAINING_FRACTION = 0.1   # a strut must keep 10% of its length


@dataclass(frozen=True)
class PairwiseCut:
    """Pairwise cut lengths for two struts meeting at a node.

    ``d_ij`` is the cut on strut i induced by strut j (zero when no cut is
    required on that side); ``cut_i``/``cut_j`` say which struts the
    acute/obtuse rule flags for cutting.
    """

    d_ij: float
    d_ji: float
    alpha: float
    cut_i: bool
    cut_j: bool


def pairwise_cut_lengths(r_i: float, r_j: float, alpha: float) -> PairwiseCut:
    """Minimum pairwise cutting lengths for two struts at angle ``alpha``.

    Parameters
    ----------
    r_i, r_j : float
        Strut radii, both > 0.
    alpha : float
        Angle in radians between the strut orientation vectors, in (0, pi).

    Returns
    -------
    PairwiseCut
        When ``alpha < pi/2`` and the radii differ, only the smaller-radius
        strut is flagged; on an exact tie both are flagged (conservative).
        When ``alpha >= pi/2`` both struts are flagged. Stored lengths are
        clamped at zero: a negative formula value means that side needs no
        cut once the partner is cut.
    """
    if r_i <= 0.0 or r_j <= 0.0:
        raise ValueError("radii must be positive")
    if not (ANGLE_EPS < alpha < math.pi - ANGLE_EPS):
        raise DegenerateAngleError(
            f"angle {alpha!r} rad is degenerate (parallel or antiparallel struts)")

    s, c = math.sin(alpha), math.cos(alpha)
    raw_ij = (r_j + r_i * c) / s
    raw_ji = (r_i + r_j * c) / s

    if alpha < math.pi / 2.0 and r_i != r_j:
        cut_i, cut_j = (r_i < r_j), (r_j < r_i)
    else:
        cut_i = cut_j = True
    d_ij = max(raw_ij, 0.0) if cut_i else 0.0
    d_ji = max(raw_ji, 0.0) if cut_j else 0.0
    return PairwiseCut(d_ij, d_ji, alpha, cut_i, cut_j)


def reduced_cut_length(r_cut: float, r_other: float, alpha: float,
                       other_cut: float) -> float:
    """Exact minimal cut on one strut given the partner's committed cut.

    Maximizes the cut strut's axis coordinate over the 2D cross-section
    region reachable by both cylinders (partner restricted to beyond its cut
    plane). A region of zero area means at most tangential contact, i.e. no
    cut is needed.
    """
    s, c = math.sin(alpha), math.cos(alpha)
    scale = max(r_cut, r_other, abs(other_cut), 1e-30)
    # half-planes a*x + b*y <= rhs; x is the cut strut's axis coordinate
    cons = np.array([
        (0.0, 1.0, r_cut),
        (0.0, -1.0, r_cut),
        (-s, c, r_other),
        (s, -c, r_other),
        (-c, -s, -other_cut),
    ])
    pts = []
    feas_tol = 1e-9 * scale
    for a in range(len(cons)):
        for b in range(a + 1, len(cons)):
            det = cons[a, 0] * cons[b, 1] - cons[b, 0] * cons[a, 1]
            if abs(det) < 1e-14:
                continue
            x = (cons[a, 2] * cons[b, 1] - cons[b, 2] * cons[a, 1]) / det
            y = (cons[a, 0] * cons[b, 2] - cons[b, 0] * cons[a, 2]) / det
            if np.all(cons[:, 0] * x + cons[:, 1] * y <= cons[:, 2] + feas_tol):
                pts.append((x, y))
    if len(pts) < 3:
        return 0.0
    # dedupe and measure the polygon; a sliver below tolerance is tangency
    arr = np.array(pts)
    keep = []
    for p in arr:
        if all(np.hypot(p[0] - q[0], p[1] - q[1]) > 1e-12 * scale for q in keep):
            keep.append(p)
    if len(keep) < 3:
        return 0.0
    poly = np.array(keep)
    centroid = poly.mean(axis=0)
    order = np.argsort(np.arctan2(poly[:, 1] - centroid[1], poly[:, 0] - centroid[0]))
    poly = poly[order]
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    if area <= 1e-12 * scale * scale:
        return 0.0
    return max(float(poly[:, 0].max()), 0.0)


@dataclass
class NodeCutProblem:
    """Priority-queue view of one node's cutting problem.

    ``d[i][j]`` is the pairwise cut on local strut i induced by local strut
    j (NaN marks pairs excluded as non-interacting, e.g. exactly antiparallel
    equal-radius struts). ``rows[i]`` is strut i's adjacency row ordered by
    descending d (id ascending on ties), and ``D[i]`` the current row maximum.
    """

    node_id: int
    strut_ids: list[int]          # local index -> global strut id
    directions: np.ndarray        # (n, 3) unit vectors away from the node
    radii: np.ndarray             # (n,)
    d: np.ndarray                 # (n, n) pairwise matrix, d[i, i] = 0
    alphas: np.ndarray            # (n, n) pairwise angles
    rows: list[list[int]] = field(default_factory=list)
    D: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.strut_ids)
        if not self.rows:
            self.rows = [
                sorted((j for j in range(n) if j != i and not math.isnan(self.d[i, j])),
                       key=lambda j: (-self.d[i, j], j))
                for i in range(n)
            ]
        if self.D is None:
            self.D = np.array([
                max((self.d[i, j] for j in self.rows[i]), default=0.0)
                for i in range(n)
            ])


def build_cut_problem(g: LatticeGraph, node_id: int) -> NodeCutProblem:
    """Pairwise cut matrix and priority structures for one node.

    Raises :class:`DegenerateAngleError` for near-parallel pairs, and for
    near-antiparallel pairs whose required cut blows up (thin strut inside a
    fat one). Exactly/nearly antiparallel pairs that require no cut are
    excluded from the problem as non-interacting.
    """
    entries = g.adjacency[node_id]
    n = len(entries)
    if n < 2:
        raise GraphError(f"node {node_id} has degree {n}; cutting needs degree >= 2")
    dirs = np.array([strut_direction(g, e.strut_id, node_id) for e in entries])
    radii = np.array([e.radius for e in entries])
    ids = [e.strut_id for e in entries]

    d = np.zeros((n, n))
    alphas = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            alpha = angle_between(dirs[i], dirs[j])
            alphas[i, j] = alphas[j, i] = alpha
            if alpha <= ANGLE_EPS:
                raise DegenerateAngleError(
                    f"struts {ids[i]} and {ids[j]} at node {node_id} are "
                    f"nearly parallel (angle {math.degrees(alpha):.2e} deg)",
                    strut_ids=(ids[i], ids[j]))
            if alpha >= math.pi - ANGLE_EPS:
                s, c = math.sin(alpha), math.cos(alpha)
                raw = max((radii[j] + radii[i] * c) / s if s > 0 else 0.0,
                          (radii[i] + radii[j] * c) / s if s > 0 else 0.0)
                if raw > 0.0:
                    raise DegenerateAngleError(
                        f"struts {ids[i]} and {ids[j]} at node {node_id} are "
                        f"nearly antiparallel with unequal radii; required cut "
                        f"diverges", strut_ids=(ids[i], ids[j]))
                # opposite half-cylinders share only a measure-zero disk
                d[i, j] = d[j, i] = math.nan
                continue
            pair = pairwise_cut_lengths(radii[i], radii[j], alpha)
            d[i, j] = pair.d_ij
            d[j, i] = pair.d_ji
    return NodeCutProblem(node_id, ids, dirs, radii, d, alphas)


@dataclass(frozen=True)
class CutCommit:
    """One committed trim: local order is the trimming order."""

    node_id: int
    strut_id: int
    cut: float


@dataclass
class NodeCutResult:
    baseline: np.ndarray          # per local strut index
    commits: list[CutCommit]
    problem: NodeCutProblem

    def by_strut(self) -> dict[int, float]:
        return {sid: float(c) for sid, c in zip(self.problem.strut_ids, self.baseline)}


def node_optimal_cut(g: LatticeGraph, node_id: int) -> NodeCutResult:
    """Priority-queue optimal cutting for all struts at one node.

    Repeatedly takes the strut with the current maximum requirement D,
    re-validates D against its unvisited neighbors (entries owed to visited
    neighbors are discarded: their constraint was already propagated when
    they were processed), commits ``C[head] = max(C[head], D[head])`` and
    propagates to every unvisited neighbor the exact reduced requirement
    given the head's committed cut. Every committed configuration keeps all
    pairs at this node intersection-free, and ``C[i] <= D_i(initial)``.
    """
    prob = build_cut_problem(g, node_id)
    n = len(prob.strut_ids)
    C = np.zeros(n)
    D = prob.D.copy()
    rows = [list(r) for r in prob.rows]
    visited = [False] * n
    pq = set(range(n))
    commits: list[CutCommit] = []

    while pq:
        head = min(pq, key=lambda i: (-D[i], i))
        while rows[head] and visited[rows[head][0]]:
            rows[head].pop(0)
        if rows[head]:
            top = rows[head][0]
            if D[head] != prob.d[head, top]:
                D[head] = prob.d[head, top]
                continue  # re-select: another strut may now carry the maximum
            if D[head] > C[head]:
                C[head] = D[head]
            for j in rows[head]:
                if not visited[j]:
                    L = reduced_cut_length(prob.radii[j], prob.radii[head],
                                           prob.alphas[head, j], C[head])
                    if L > C[j]:
                        C[j] = L
            rows[head] = []
        visited[head] = True
        pq.remove(head)
        commits.append(CutCommit(node_id, prob.strut_ids[head], float(C[head])))

    return NodeCutResult(C, commits, prob)


def closest_points_on_cut_struts(g: LatticeGraph, node_id: int,
                                 strut_i: int, strut_j: int,
                                 cut_i: float, cut_j: float) -> tuple[np.ndarray, np.ndarray]:
    """Closest end-face rim points of two cut struts, relative to the node.

    ``t_i = normalize(e_i x (e_j x e_i)) * r_i + e_i * cut_i`` and
    symmetrically for j; ``cut`` is the total (baseline + refinement) cut.
    """
    e_i = strut_direction(g, strut_i, node_id)
    e_j = strut_direction(g, strut_j, node_id)
    r_i = g.struts[strut_i].radius
    r_j = g.struts[strut_j].radius
    return _closest_pair(e_i, e_j, r_i, r_j, cut_i, cut_j)


def _closest_pair(e_i, e_j, r_i, r_j, cut_i, cut_j):
    cross_i = np.cross(e_i, np.cross(e_j, e_i))
    cross_j = np.cross(e_j, np.cross(e_i, e_j))
    ni, nj = np.linalg.norm(cross_i), np.linalg.norm(cross_j)
    if ni < 1e-12 or nj < 1e-12:
        raise DegenerateAngleError("parallel struts have no unique closest rim points")
    t_i = cross_i / ni * r_i + e_i * cut_i
    t_j = cross_j / nj * r_j + e_j * cut_j
    return t_i, t_j


def refinement_penalty(h: np.ndarray) -> float:
    """Sum of squared refinement cut lengths (phase-1 objective f1)."""
    h = np.asarray(h, float)
    return float(np.sum(h * h))


def adjacency_gap_penalty(directions: np.ndarray, radii: np.ndarray,
                          totals: np.ndarray,
                          pairs: list[tuple[int, int]]) -> float:
    """Sum over ordered topology pairs of squared end-face gap (phase-1 f2).

    A pair contributes when the segment between the closest rim points runs
    "ahead" of either end face (positive dot with that strut's direction),
    i.e. when further cutting would bring the faces together.
    """
    total = 0.0
    for i, j in pairs:
        for a, b in ((i, j), (j, i)):
            t_a, t_b = _closest_pair(directions[a], directions[b],
                                     radii[a], radii[b], totals[a], totals[b])
            gap = t_b - t_a
            if np.dot(gap, directions[a]) > 0.0 or np.dot(-gap, directions[b]) > 0.0:
                total += float(np.dot(gap, gap))
    return total


def _batched_gap_objective(directions, radii, baseline, pairs, rmax, w1, w2):
    """Vectorized phase-1 objective over a population of refinement vectors."""
    pairs_arr = np.array(pairs, int).reshape(-1, 2)
    e_a = directions[pairs_arr[:, 0]]          # (P, 3)
    e_b = directions[pairs_arr[:, 1]]
    perp_a = np.cross(e_a, np.cross(e_b, e_a))
    perp_b = np.cross(e_b, np.cross(e_a, e_b))
    perp_a /= np.linalg.norm(perp_a, axis=1, keepdims=True)
    perp_b /= np.linalg.norm(perp_b, axis=1, keepdims=True)
    rim_a = perp_a * radii[pairs_arr[:, 0], None]    # radial rim offsets
    rim_b = perp_b * radii[pairs_arr[:, 1], None]

    def evaluate(hs: np.ndarray) -> np.ndarray:
        tot = baseline[None, :] + hs                  # (pop, n)
        t_a = rim_a[None] + e_a[None] * tot[:, pairs_arr[:, 0], None]
        t_b = rim_b[None] + e_b[None] * tot[:, pairs_arr[:, 1], None]
        gap = t_b - t_a                               # (pop, P, 3)
        active = (np.einsum("kpc,pc->kp", gap, e_a) > 0.0) \
            | (np.einsum("kpc,pc->kp", -gap, e_b) > 0.0)
        gap2 = np.einsum("kpc,kpc->kp", gap, gap)
        f2 = 2.0 * np.sum(gap2 * active, axis=1)      # ordered pairs = 2x unordered
        f1 = np.sum(hs * hs, axis=1)
        return (w1 * f1 + w2 * f2) / (rmax * rmax)

    return evaluate


def aligned_refinements(problem: NodeCutProblem, baseline: np.ndarray,
                        pairs: list[tuple[int, int]]) -> np.ndarray:
    """Minimal extra cuts putting every topology pair's end faces behind each
    other (all sign conditions inactive), by fixpoint iteration."""
    totals = np.asarray(baseline, float).copy()
    for _ in range(200):
        changed = False
        for i, j in pairs:
            alpha = problem.alphas[i, j]
            s, c = math.sin(alpha), math.cos(alpha)
            for x, y in ((i, j), (j, i)):
                value = problem.radii[y] * s + totals[y] * c - totals[x]
                if value > 0.0:
                    totals[x] += value + 1e-12
                    changed = True
        if not changed:
            break
    return totals - baseline


def _batched_gap_condition(directions, radii, baseline, pairs):
    """Vectorized test that no topology pair has a frontward end-face gap."""
    pairs_arr = np.array(pairs, int).reshape(-1, 2)
    e_a = directions[pairs_arr[:, 0]]
    e_b = directions[pairs_arr[:, 1]]
    al = np.array([math.acos(np.clip(np.dot(a, b), -1.0, 1.0))
                   for a, b in zip(e_a, e_b)])
    s, c = np.sin(al), np.cos(al)
    r_a, r_b = radii[pairs_arr[:, 0]], radii[pairs_arr[:, 1]]

    def check(hs: np.ndarray) -> np.ndarray:
        tot = baseline[None, :] + hs
        ta, tb = tot[:, pairs_arr[:, 0]], tot[:, pairs_arr[:, 1]]
        v_a = r_b[None] * s[None] + tb * c[None] - ta
        v_b = r_a[None] * s[None] + ta * c[None] - tb
        return ~np.any((v_a > 0.0) | (v_b > 0.0), axis=1)

    return check


def postprocess_cuts(g: LatticeGraph, node_id: int, baseline: np.ndarray,
                     pairs: list[tuple[int, int]], w1: float = 1.0,
                     w2: float = 1.0, gwo_config=None, box_factor: float = 2.0):
    """Refine baseline cuts with additional lengths ``h`` chosen by the wolf
    pack optimizer, balancing extra material loss against end-face adjacency.

    ``pairs`` are the topology pairs (hull edges, local strut indices) whose
    end faces should sit close together. A solution is *valid* when no pair
    triggers the frontward-gap condition; the best valid solution is
    returned (falling back to the unconstrained best if none was found).
    Returns ``(h, GwoResult)``.
    """
    from .gwo import GwoConfig, minimize

    prob = build_cut_problem(g, node_id)
    n = len(prob.strut_ids)
    baseline = np.asarray(baseline, float)
    rmax = float(prob.radii.max())
    box = [(0.0, box_factor * rmax)] * n
    if gwo_config is None:
        gwo_config = GwoConfig(box=box)
    else:
        gwo_config = gwo_config.with_box(box)
    seeds = [np.zeros(n)]
    if pairs:
        seeds.append(np.minimum(aligned_refinements(prob, baseline, pairs),
                                box_factor * rmax))
    gwo_config = gwo_config.with_initial_guesses(seeds)

    if pairs:
        batch = _batched_gap_objective(prob.directions, prob.radii, baseline,
                                       pairs, rmax, w1, w2)
        valid = _batched_gap_condition(prob.directions, prob.radii, baseline, pairs)
        gwo_config = gwo_config.with_validity(
            validity=lambda h: bool(valid(h[None, :])[0]), batch_validity=valid)
    else:
        def batch(hs):
            return w1 * np.sum(hs * hs, axis=1) / (rmax * rmax)

    def objective(h):
        return float(batch(h[None, :])[0])

    result = minimize(objective, gwo_config, batch_objective=batch)
    h = result.best_valid_position if result.best_valid_position is not None \
        else result.position
    return h.copy(), result


def penetration_margin(r_i: float, r_j: float, alpha: float,
                       tot_i: float, tot_j: float) -> float:
    """Signed clearance of two cut cylinders in their cross-section plane.

    Positive values mean overlap depth, zero tangency, negative a separation
    margin. Computed as the optimum of ``max_p min_k (b_k - a_k . p)`` over
    the six unit-normal half-plane constraints describing both half-strips.
    """
    s, c = math.sin(alpha), math.cos(alpha)
    cons = np.array([
        (0.0, 1.0, r_i),
        (0.0, -1.0, r_i),
        (-s, c, r_j),
        (s, -c, r_j),
        (-1.0, 0.0, -tot_i),
        (-c, -s, -tot_j),
    ])
    return float(_margins_batch(cons[None, :, :], np.array([max(r_i, r_j)]))[0])


_MARGIN_TRIPLES = np.array([(a, b, e)
                            for a in range(6)
                            for b in range(a + 1, 6)
                            for e in range(b + 1, 6)])


def _margins_batch(cons: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Penetration margins for a batch of constraint systems (P, 6, 3).

    Solves the LP max t s.t. a.p + t <= b per system by enumerating the 20
    three-constraint vertices; the optimum sits at a feasible vertex.
    """
    P = len(cons)
    tri = _MARGIN_TRIPLES
    A = np.concatenate([cons[:, tri, :2],
                        np.ones((P, len(tri), 3, 1))], axis=3)    # (P, 20, 3, 3)
    rhs = cons[:, tri, 2]                                          # (P, 20, 3)
    dets = np.linalg.det(A)
    ok = np.abs(dets) > 1e-12
    sols = np.full((P, len(tri), 3), np.nan)
    if np.any(ok):
        sols[ok] = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    with np.errstate(invalid="ignore"):
        slack = np.einsum("ptk,pck->ptc", sols,
                          np.concatenate([cons[:, :, :2], np.ones((P, 6, 1))], axis=2))
    feasible = ok & np.all(slack <= cons[:, None, :, 2] + 1e-9 * scales[:, None, None],
                           axis=2)
    t = np.where(feasible, sols[..., 2], -np.inf)
    return t.max(axis=1)


def enforce_pair_clearance(problem: NodeCutProblem, totals: np.ndarray,
                           clearance_frac: float = 1e-3,
                           max_rounds: int = 100) -> np.ndarray:
    """Raise total cuts minimally until every strut pair at the node is
    strictly separated (tangent contact would pinch the stitched patches).

    Returns the per-strut amounts added. Skipped (non-interacting) pairs are
    left alone.
    """
    n = len(problem.strut_ids)
    totals = np.asarray(totals, float)
    added = np.zeros(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
             if not math.isnan(problem.d[i, j])]
    if not pairs:
        return added
    pa = np.array(pairs)
    r_i, r_j = problem.radii[pa[:, 0]], problem.radii[pa[:, 1]]
    al = problem.alphas[pa[:, 0], pa[:, 1]]
    s, c = np.sin(al), np.cos(al)
    zeros = np.zeros_like(s)
    ones = np.ones_like(s)
    base_cons = np.stack([
        np.stack([zeros, ones, r_i], axis=1),
        np.stack([zeros, -ones, r_i], axis=1),
        np.stack([-s, c, r_j], axis=1),
        np.stack([s, -c, r_j], axis=1),
        np.stack([-ones, zeros, zeros], axis=1),      # rhs filled per round
        np.stack([-c, -s, zeros], axis=1),
    ], axis=1)                                        # (P, 6, 3)
    scales = np.maximum(r_i, r_j)
    eps = clearance_frac * np.minimum(r_i, r_j)

    for _ in range(max_rounds):
        cons = base_cons.copy()
        cons[:, 4, 2] = -totals[pa[:, 0]]
        cons[:, 5, 2] = -totals[pa[:, 1]]
        margins = _margins_batch(cons, scales)
        tight = margins > -eps
        if not np.any(tight):
            break
        bump = np.where(tight, 0.5 * (margins + eps) + 1e-12, 0.0)
        delta = np.zeros(n)
        np.maximum.at(delta, pa[:, 0], bump)
        np.maximum.at(delta, pa[:, 1], bump)
        totals += delta
        added += delta
    return added


@dataclass(frozen=True)
class CutPlan:
    """Per (node, strut) cut lengths: baseline c, refinement h, total c + h."""

    baseline: dict[tuple[int, int], float]
    refinement: dict[tuple[int, int], float]

    def total(self, node_id: int, strut_id: int) -> float:
        key = (node_id, strut_id)
        return self.baseline.get(key, 0.0) + self.refinement.get(key, 0.0)


def check_strut_budgets(g: LatticeGraph, plan: CutPlan) -> list[CornerCaseError]:
    """Struts whose total cuts leave less than the minimum remaining length."""
    problems = []
    for strut in g.struts:
        a, b = strut.endpoints
        length = g.strut_length(strut.id)
        total = plan.total(a, strut.id) + plan.total(b, strut.id)
        if total > (1.0 - MIN_REMAINING_FRACTION) * length:
            problems.append(CornerCaseError(
                f"strut {strut.id}: cuts {total:.6g} exceed budget "
                f"{(1.0 - MIN_REMAINING_FRACTION) * length:.6g} of length {length:.6g}",
                strut_id=strut.id))
    return problems
