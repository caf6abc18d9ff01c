"""Design-search algorithms over the posterior-trace objective.

All searches work on a periodic arclength grid {j * L / J : j = 0..J-1} and
treat the objective as permutation invariant in the activation positions.
Traces record accepted progress only: exhaustive search logs each strict
improvement, sequential searches log each newly placed activation, gradient
descent logs each accepted step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GradientDescentConfig",
    "TraceRecord",
    "OptimizationTrace",
    "exhaustive_search",
    "greedy_sequential",
    "gradient_descent",
    "enhanced_sequential",
]

PHASE_EXHAUSTIVE = "exhaustive-update"
PHASE_NEW_ACTIVATION = "new-activation"
PHASE_GRADIENT_STEP = "gradient-step"


@dataclass(frozen=True)
class GradientDescentConfig:
    """Line-search and stopping protocol for the descent iteration."""

    line_points: int = 50
    initial_segment: float = 0.0  # set from the circumference, L / 5
    shrink_factor: float = 0.2
    max_shrinks: int = 5
    relative_decrease_stop: float = 1e-4
    step_size_stop: float = 1e-3
    required_hits: int = 5

    @classmethod
    def default(cls, circumference: float) -> "GradientDescentConfig":
        return cls(initial_segment=circumference / 5.0)

    def __post_init__(self):
        if self.line_points < 1 or self.max_shrinks < 0:
            raise ValueError("invalid line-search configuration")
        if not (0.0 < self.shrink_factor < 1.0):
            raise ValueError("shrink factor must lie in (0, 1)")


@dataclass
class TraceRecord:
    iteration: int
    phase: str
    design: np.ndarray
    value: float


@dataclass
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    evaluations: int = 0

    def append(self, phase: str, design, value: float) -> None:
        self.records.append(
            TraceRecord(
                iteration=len(self.records) + 1,
                phase=phase,
                design=np.array(design, dtype=float).copy(),
                value=float(value),
            )
        )

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]


def _grid(J: int, circumference: float) -> np.ndarray:
    return np.arange(J) * (circumference / J)


def exhaustive_search(objective, k_activations: int, grid_points: int, circumference: float):
    """Global grid search over nondecreasing position tuples.

    Permutation invariance of the objective cuts the J^K product grid down to
    binomial(J + K - 1, K) evaluations.  The trace logs every strict
    improvement of the incumbent.
    """
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    grid = _grid(grid_points, circumference)
    trace = OptimizationTrace()
    best_value = np.inf
    best = None
    for combo in itertools.combinations_with_replacement(range(grid_points), k_activations):
        design = grid[list(combo)]
        value = objective(design)
        trace.evaluations += 1
        if value < best_value:
            best_value, best = value, design
            trace.append(PHASE_EXHAUSTIVE, design, value)
    return best, trace


def greedy_sequential(objective, k_activations: int, grid_points: int, circumference: float):
    """Place activations one at a time, each by a 1-D grid scan.

    Previously placed positions stay frozen; exactly J*K objective calls.
    """
    grid = _grid(grid_points, circumference)
    trace = OptimizationTrace()
    positions: list[float] = []
    for _ in range(k_activations):
        values = np.empty(grid_points)
        for j, p in enumerate(grid):
            values[j] = objective(np.array(positions + [p]))
        trace.evaluations += grid_points
        positions.append(float(grid[int(np.argmin(values))]))
        trace.append(PHASE_NEW_ACTIVATION, positions, values.min())
    return np.array(positions), trace


def _line_search(objective, design, value, direction, config, trace):
    """Shrinking grid scan along ``direction``; returns accepted point or None."""
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return None
    unit = direction / norm
    prepare = getattr(objective, "prepare", None)  # optional batch hook
    segment = config.initial_segment
    steps = np.arange(1, config.line_points + 1) / config.line_points
    for _ in range(config.max_shrinks + 1):
        candidates = design[None, :] + (segment * steps)[:, None] * unit[None, :]
        if prepare is not None:
            prepare(candidates)
        values = np.empty(config.line_points)
        for i, cand in enumerate(candidates):
            values[i] = objective(cand)
        trace.evaluations += config.line_points
        best = int(np.argmin(values))  # ties resolve to the smallest step
        if values[best] < value:
            return candidates[best], float(values[best])
        segment *= config.shrink_factor
    return None


def gradient_descent(
    objective,
    gradient,
    start,
    config: GradientDescentConfig,
    trace: OptimizationTrace | None = None,
    max_steps: int | None = None,
):
    """Descent with a shrinking equidistant line search.

    Each iteration scans ``line_points`` points over a segment of the current
    length along the negative gradient and accepts the largest decrease; the
    segment shrinks up to ``max_shrinks`` times when no candidate improves,
    after which the search terminates.  Two further stop rules fire after
    ``required_hits`` consecutive occurrences: relative decrease below
    ``relative_decrease_stop`` or step norm below ``step_size_stop``.
    """
    design = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    own_trace = trace is None
    if own_trace:
        trace = OptimizationTrace()
    value = objective(design)
    trace.evaluations += 1

    rel_hits = 0
    step_hits = 0
    steps = 0
    while max_steps is None or steps < max_steps:
        result = _line_search(objective, design, value, -gradient(design), config, trace)
        if result is None:
            break
        new_design, new_value = result
        rel_decrease = (value - new_value) / value if value != 0 else 0.0
        step_norm = float(np.linalg.norm(new_design - design))
        design, value = new_design, new_value
        trace.append(PHASE_GRADIENT_STEP, design, value)
        steps += 1

        rel_hits = rel_hits + 1 if rel_decrease < config.relative_decrease_stop else 0
        step_hits = step_hits + 1 if step_norm < config.step_size_stop else 0
        if rel_hits >= config.required_hits or step_hits >= config.required_hits:
            break
    return design, trace


def enhanced_sequential(
    objective,
    gradient,
    k_activations: int,
    grid_points: int,
    circumference: float,
    config: GradientDescentConfig | None = None,
):
    """Greedy placement with a full gradient-descent polish after each stage.

    After every 1-D exhaustive placement, all current positions are refined
    by gradient descent, so the design sits at a local minimum before the
    next activation arrives.
    """
    if config is None:
        config = GradientDescentConfig.default(circumference)
    grid = _grid(grid_points, circumference)
    trace = OptimizationTrace()
    positions = np.empty(0)
    for _ in range(k_activations):
        values = np.empty(grid_points)
        for j, p in enumerate(grid):
            values[j] = objective(np.append(positions, p))
        trace.evaluations += grid_points
        positions = np.append(positions, grid[int(np.argmin(values))])
        trace.append(PHASE_NEW_ACTIVATION, positions, values.min())
        positions, _ = gradient_descent(objective, gradient, positions, config, trace=trace)
    return positions, trace
