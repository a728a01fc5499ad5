"""Grey Wolf Optimizer with box constraints and deterministic seeding.

Canonical update scheme: the encircling coefficient ``a`` decays linearly
from 2 to 0, each wolf moves to the mean of three positions guided by the
alpha, beta and delta wolves, and every candidate is clamped back into the
search box. Randomness is drawn per iteration from a counter-based generator
keyed on (seed, iteration) and sliced per wolf, so results are bit-identical
no matter how fitness evaluations are scheduled.

A validity predicate (optional) marks solutions acceptable to the caller;
the optimizer tracks the best valid solution alongside the best overall and
stops early once the valid track stagnates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

DEFAULT_POPULATION = 30
DEFAULT_STAGNATION_WINDOW = 15
STAGNATION_RELTOL = 1e-6


@dataclass(frozen=True)
class GwoConfig:
    """Optimizer configuration.

    ``box`` is a per-dimension list of (lo, hi); ``validity`` an optional
    predicate on a solution vector (absent means every solution is valid);
    ``batch_validity`` an optional vectorized form mapping (pop, dim) to a
    boolean array; ``initial_guesses`` are seed positions injected into the
    initial population (clamped to the box).
    """

    box: Sequence[tuple[float, float]]
    population: int = DEFAULT_POPULATION
    max_iterations: int = 100
    seed: int = 0
    stagnation_window: int = DEFAULT_STAGNATION_WINDOW
    validity: Callable[[np.ndarray], bool] | None = None
    batch_validity: Callable[[np.ndarray], np.ndarray] | None = None
    initial_guesses: Sequence[np.ndarray] = field(default_factory=tuple)
    track_positions: bool = False

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4 (alpha, beta, delta + omega)")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"invalid box dimension [{lo}, {hi}]")

    def with_box(self, box) -> "GwoConfig":
        return replace(self, box=box)

    def with_initial_guesses(self, guesses) -> "GwoConfig":
        return replace(self, initial_guesses=tuple(guesses))

    def with_validity(self, validity=None, batch_validity=None) -> "GwoConfig":
        return replace(self, validity=validity, batch_validity=batch_validity)


@dataclass
class GwoResult:
    """Outcome of one optimizer run.

    ``fitness`` is the minimum value ever evaluated and ``valid`` whether
    that solution satisfies the predicate; ``best_valid_*`` track the best
    predicate-satisfying solution separately. ``history`` records
    (best fitness, best-valid fitness) after the initial evaluation and
    after each iteration; ``converged_iteration`` is the first index whose
    best-valid fitness is already within stagnation tolerance of the final
    one (the iteration the run effectively reached its converged valid
    state).
    """

    position: np.ndarray
    fitness: float
    iterations: int
    valid: bool
    first_valid_iteration: int | None
    history: list[tuple[float, float]]
    best_valid_position: np.ndarray | None = None
    best_valid_fitness: float = np.inf
    best_positions: list | None = None   # per-iteration best, when tracked

    @property
    def converged_iteration(self) -> int:
        final = self.best_valid_fitness if np.isfinite(self.best_valid_fitness) \
            else self.history[-1][0]
        tol = STAGNATION_RELTOL * max(abs(final), 1e-300)
        track = 1 if np.isfinite(self.best_valid_fitness) else 0
        for t, row in enumerate(self.history):
            if np.isfinite(row[track]) and row[track] - final <= tol:
                return t
        return len(self.history) - 1


def clamp_to_box(position: np.ndarray, box: Sequence[tuple[float, float]]) -> np.ndarray:
    """Clamp each coordinate into its [lo, hi] interval."""
    arr = np.asarray(position, float)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return np.clip(arr, lo, hi)


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(iteration)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def minimize(objective: Callable[[np.ndarray], float], config: GwoConfig,
             batch_objective: Callable[[np.ndarray], np.ndarray] | None = None) -> GwoResult:
    """Minimize a box-constrained objective with a grey wolf pack.

    Parameters
    ----------
    objective : callable
        Maps a position vector to a finite float (penalties must be large
        finite values, never infinities).
    config : GwoConfig
    batch_objective : callable, optional
        Vectorized form mapping a (pop, dim) array to (pop,) fitnesses;
        must agree with ``objective``. Used for speed when provided.

    The run stops at ``max_iterations``, or earlier once a valid solution
    exists and the valid-track fitness improved by less than 1e-6
    (relative) over the stagnation window.
    """
    dim = len(config.box)
    lo = np.array([b[0] for b in config.box])
    hi = np.array([b[1] for b in config.box])
    span = hi - lo
    pop = config.population

    if batch_objective is None:
        def batch_objective(xs):
            return np.array([objective(x) for x in xs])

    def evaluate(xs: np.ndarray) -> np.ndarray:
        fit = np.asarray(batch_objective(xs), float)
        if not np.all(np.isfinite(fit)):
            bad = int(np.flatnonzero(~np.isfinite(fit))[0])
            raise ValueError(
                f"objective returned non-finite value {fit[bad]!r} at {xs[bad]!r}")
        return fit

    if config.batch_validity is not None:
        batch_valid = config.batch_validity
    elif config.validity is not None:
        single = config.validity
        def batch_valid(xs):
            return np.array([bool(single(x)) for x in xs])
    else:
        def batch_valid(xs):
            return np.ones(len(xs), bool)

    rng0 = _iteration_rng(config.seed, 0)
    wolves = lo + rng0.random((pop, dim)) * span
    for k, guess in enumerate(config.initial_guesses[:pop]):
        wolves[k] = np.clip(np.asarray(guess, float), lo, hi)

    best_pos: np.ndarray | None = None
    best_fit = np.inf
    best_ok = False
    best_valid_pos: np.ndarray | None = None
    best_valid_fit = np.inf
    first_valid: int | None = None
    history: list[tuple[float, float]] = []

    def absorb(xs: np.ndarray, fit: np.ndarray, t: int):
        nonlocal best_pos, best_fit, best_ok, best_valid_pos, best_valid_fit, first_valid
        ok = batch_valid(xs)
        idx = int(np.argmin(fit))
        if fit[idx] < best_fit:
            best_fit = float(fit[idx])
            best_pos = xs[idx].copy()
            best_ok = bool(ok[idx])
        if np.any(ok):
            vi = int(np.argmin(np.where(ok, fit, np.inf)))
            if fit[vi] < best_valid_fit:
                best_valid_fit = float(fit[vi])
                best_valid_pos = xs[vi].copy()
                if first_valid is None:
                    first_valid = t

    fitness = evaluate(wolves)
    absorb(wolves, fitness, 0)
    history.append((best_fit, best_valid_fit))
    positions = [best_pos.copy()] if config.track_positions else None

    iterations = 0
    window = config.stagnation_window
    for t in range(1, config.max_iterations + 1):
        iterations = t
        order = np.argsort(fitness, kind="stable")
        leaders = wolves[order[:3]]                       # alpha, beta, delta

        a = 2.0 - 2.0 * (t - 1) / max(config.max_iterations, 1)
        r = _iteration_rng(config.seed, t).random((pop, 6, dim))
        guided = np.empty((3, pop, dim))
        for L in range(3):
            A = 2.0 * a * r[:, 2 * L, :] - a
            Cc = 2.0 * r[:, 2 * L + 1, :]
            dist = np.abs(Cc * leaders[L][None, :] - wolves)
            guided[L] = leaders[L][None, :] - A * dist
        wolves = np.clip(guided.mean(axis=0), lo, hi)
        fitness = evaluate(wolves)
        absorb(wolves, fitness, t)
        history.append((best_fit, best_valid_fit))
        if positions is not None:
            positions.append(best_pos.copy())

        if np.isfinite(best_valid_fit) and t >= window:
            then = history[t - window][1]
            if np.isfinite(then) and \
                    then - best_valid_fit <= STAGNATION_RELTOL * max(abs(best_valid_fit), 1e-300):
                break

    return GwoResult(best_pos, best_fit, iterations, best_ok, first_valid,
                     history, best_valid_pos, best_valid_fit, positions)
