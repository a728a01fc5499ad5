"""End-to-end construction: cuts, refinement, patch design, stitching.

Per-node work (optimal cutting, cut refinement, clearance, patch design) is
independent across nodes and may run in a process pool; results are merged
in node-id order so the output is byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import cutting, nodeshape, topology
from .brep import BRepModel, stitch
from .errors import CornerCaseError, LatticeError
from .graph import LatticeGraph
from .gwo import GwoConfig

DEFAULT_SEED = 2024


@dataclass(frozen=True)
class PipelineConfig:
    """Deterministic knobs for a full build."""

    seed: int = DEFAULT_SEED
    population: int = 30
    iterations_cut: int = 100
    iterations_shape: int = 150
    w1: float = 1.0
    w2: float = 1.0
    w1p: float = 1.0
    w2p: float = 1.0
    wb1: float = 10.0
    wb2: float = 10.0
    box_factor: float = 2.0
    clearance_frac: float = 1e-3
    threads: int = 1
    log_cuts: bool = False
    trace_objective: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def semantic_dict(self) -> dict:
        """Config fields that shape the output model (execution knobs like
        worker count and logging flags excluded, so outputs stay
        byte-identical across worker counts)."""
        skip = {"threads", "log_cuts", "trace_objective"}
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in skip}


@dataclass
class NodeResult:
    node_id: int
    degree: int
    strut_ids: list[int]
    baseline: np.ndarray | None = None
    refinement: np.ndarray | None = None
    totals: np.ndarray | None = None
    patches: nodeshape.NodalPatchSet | None = None
    commits: list[cutting.CutCommit] = field(default_factory=list)
    phase1_iterations: int | None = None
    phase2_iterations: int | None = None
    warnings: list[str] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    error: str | None = None
    error_struts: tuple[int, ...] = ()


@dataclass
class BuildResult:
    model: BRepModel | None
    nodes: list[NodeResult]
    plan: cutting.CutPlan
    corner_cases: list[int]
    failures: list[NodeResult]

    @property
    def ok(self) -> bool:
        return self.model is not None and not self.corner_cases and not self.failures


def _phase_seed(seed: int, node_id: int, phase: int) -> int:
    return (seed * 1000003 + node_id * 31 + phase) & 0x7FFFFFFFFFFFFFFF


def process_node(g: LatticeGraph, node_id: int, cfg: PipelineConfig) -> NodeResult:
    """Cut, refine and design one node. Pure function of (graph, id, config)."""
    degree = g.degree(node_id)
    strut_ids = [e.strut_id for e in g.adjacency[node_id]]
    out = NodeResult(node_id, degree, strut_ids)
    if degree == 0:
        return out
    if degree == 1:
        out.baseline = np.zeros(1)
        out.refinement = np.zeros(1)
        out.totals = np.zeros(1)
        return out
    try:
        cut_res = cutting.node_optimal_cut(g, node_id)
        out.baseline = cut_res.baseline
        out.commits = cut_res.commits

        if degree == 2:
            pairs = [(0, 1)]
            topo = None
        else:
            topo = topology.build_node_topology(g, node_id)
            out.warnings.extend(topo.warnings)
            pairs = topo.edges

        gcfg1 = GwoConfig(box=[(0.0, 1.0)], population=cfg.population,
                          max_iterations=cfg.iterations_cut,
                          seed=_phase_seed(cfg.seed, node_id, 1))
        h, res1 = cutting.postprocess_cuts(
            g, node_id, out.baseline, pairs, w1=cfg.w1, w2=cfg.w2,
            gwo_config=gcfg1, box_factor=cfg.box_factor)
        out.phase1_iterations = res1.converged_iteration
        totals = out.baseline + h

        prob = cutting.build_cut_problem(g, node_id)
        h += cutting.enforce_pair_clearance(prob, totals,
                                            clearance_frac=cfg.clearance_frac)
        out.refinement = h
        out.totals = out.baseline + h

        if degree >= 3:
            gcfg2 = GwoConfig(box=[(0.0, 1.0)], population=cfg.population,
                              max_iterations=cfg.iterations_shape,
                              seed=_phase_seed(cfg.seed, node_id, 2),
                              track_positions=cfg.trace_objective)
            weights = {"w1p": cfg.w1p, "w2p": cfg.w2p,
                       "wb1": cfg.wb1, "wb2": cfg.wb2}
            patches, res2 = nodeshape.optimize_node(
                g, node_id, topo, out.totals, weights=weights, gwo_config=gcfg2)
            out.patches = patches
            out.phase2_iterations = res2.converged_iteration
            if cfg.trace_objective and res2.best_positions is not None:
                out.trace = _component_trace(patches.problem, res2, weights)
    except LatticeError as exc:
        out.error = str(exc)
        ids = getattr(exc, "strut_ids", None) or ()
        single = getattr(exc, "strut_id", None)
        out.error_struts = tuple(ids) if ids else ((single,) if single is not None else ())
    return out


def _component_trace(problem: nodeshape.NodeShapeProblem, result, weights) -> list[dict]:
    trace = []
    for it, (fitness, _valid) in enumerate(result.history):
        trace.append({"iteration": it, "objective": fitness})
    return trace


def _worker(args):
    text, node_id, cfg_dict = args
    from .graph import parse_lattice
    g = parse_lattice(text)
    return process_node(g, node_id, PipelineConfig(**cfg_dict))


def build_model(g: LatticeGraph, cfg: PipelineConfig | None = None) -> BuildResult:
    """Run the full pipeline and stitch a validated-ready model.

    Corner-case struts (cut budget exceeded) and node-design failures leave
    ``model`` unset; callers report them and exit nonzero.
    """
    cfg = cfg or PipelineConfig()
    node_ids = [n.id for n in g.nodes]

    if cfg.threads > 1 and len(node_ids) > 1:
        from .graph import serialize_lattice
        text = serialize_lattice(g)
        args = [(text, nid, cfg.as_dict()) for nid in node_ids]
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_worker, args, chunksize=32))
        results.sort(key=lambda r: r.node_id)
    else:
        results = [process_node(g, nid, cfg) for nid in node_ids]

    failures = [r for r in results if r.error is not None]

    baseline: dict[tuple[int, int], float] = {}
    refinement: dict[tuple[int, int], float] = {}
    for r in results:
        if r.baseline is None:
            continue
        for k, sid in enumerate(r.strut_ids):
            baseline[(r.node_id, sid)] = float(r.baseline[k])
            refinement[(r.node_id, sid)] = float(r.refinement[k]) \
                if r.refinement is not None else 0.0
    plan = cutting.CutPlan(baseline, refinement)
    corner = [] if failures else [e.strut_id for e in cutting.check_strut_budgets(g, plan)]

    model = None
    if not failures and not corner:
        totals = {k: plan.total(*k) for k in baseline}
        patch_sets = {r.node_id: r.patches for r in results if r.patches is not None}
        stats = {r.node_id: {"phase1": r.phase1_iterations,
                             "phase2": r.phase2_iterations,
                             "warnings": r.warnings} for r in results}
        model = stitch(g, totals, patch_sets, node_stats=stats,
                       provenance={"config": cfg.semantic_dict()})
    return BuildResult(model, results, plan, corner, failures)


def naive_build_model(g: LatticeGraph, cfg: PipelineConfig | None = None) -> BuildResult:
    """Reference variant: naive maximal cuts, uniform increments, no search.

    Cuts every strut by its initial pairwise maximum D, spaces patch
    vertices uniformly, and skips both optimizer phases. Used for deviation
    comparisons.
    """
    cfg = cfg or PipelineConfig()
    results = []
    for node in g.nodes:
        nid = node.id
        degree = g.degree(nid)
        strut_ids = [e.strut_id for e in g.adjacency[nid]]
        out = NodeResult(nid, degree, strut_ids)
        results.append(out)
        if degree == 0:
            continue
        if degree == 1:
            out.baseline = out.refinement = np.zeros(1)
            out.totals = np.zeros(1)
            continue
        prob = cutting.build_cut_problem(g, nid)
        out.baseline = prob.D.copy()
        h = cutting.enforce_pair_clearance(prob, out.baseline.copy(),
                                           clearance_frac=cfg.clearance_frac)
        out.refinement = h
        out.totals = out.baseline + h
        if degree >= 3:
            topo = topology.build_node_topology(g, nid)
            problem = nodeshape.build_shape_problem(g, nid, topo, out.totals)
            uniform = np.concatenate([
                np.full(topo.hull_degree(i), 2.0 * np.pi / topo.hull_degree(i))
                for i in range(degree)])
            out.patches = nodeshape.build_patches(problem, uniform)

    baseline = {}
    refinement = {}
    for r in results:
        if r.baseline is None:
            continue
        for k, sid in enumerate(r.strut_ids):
            baseline[(r.node_id, sid)] = float(r.baseline[k])
            refinement[(r.node_id, sid)] = float(r.refinement[k])
    plan = cutting.CutPlan(baseline, refinement)
    corner = [e.strut_id for e in cutting.check_strut_budgets(g, plan)]
    model = None
    if not corner:
        totals = {k: plan.total(*k) for k in baseline}
        patch_sets = {r.node_id: r.patches for r in results if r.patches is not None}
        model = stitch(g, totals, patch_sets,
                       provenance={"config": cfg.semantic_dict(), "variant": "naive"})
    return BuildResult(model, results, plan, corner, [])
