"""Experiment configuration, orchestration, and machine-readable artifacts.

A run resolves its configuration, builds the geometry/mesh/solver stack,
precomputes the sensor fields, executes the selected search algorithm, and
writes a fixed set of plain-text artifacts: a key=value config echo, a CSV
trace, a CSV final design, a boundary-outline polyline, and a mesh export.
Identical configuration and seed reproduce the files byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bayes import (
    BayesError,
    a_optimality_gradient,
    a_optimality_target,
    build_prior,
    roi_weights,
)
from .fem import FemError, LameBackground, assemble_stiffness
from .forward import LinearizedMapAssembler, precompute_sensors
from .geometry import ActivationShape, BoundaryGeometry, boundary_point
from .meshing import (
    MeshError,
    build_mesh,
    build_subdomains,
    roi_mask,
    write_mesh_file,
)
from .search import (
    GradientDescentConfig,
    OptimizationTrace,
    enhanced_sequential,
    exhaustive_search,
    gradient_descent,
    greedy_sequential,
)

__all__ = [
    "MATERIALS",
    "ExperimentConfig",
    "ConfigError",
    "Experiment",
    "RunArtifacts",
    "run_experiment",
    "evaluate_design",
    "main",
]

log = logging.getLogger("elastodesign")

# Background Lame pairs (lambda0, mu0) in Pa.
MATERIALS = {
    "acryl": (2.7654e9, 1.1852e9),
    "iron": (3.9188e10, 5.3675e10),
    "rubber": (8.1081e8, 3.3784e7),
}

ALGORITHMS = ("exhaustive", "greedy", "enhanced", "gradient")

OUTLINE_SAMPLES = 2000


class ConfigError(ValueError):
    """Raised before any numerical work when a configuration is invalid."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment parameters (defaults mirror the standard setup)."""

    material: str = "acryl"
    lambda0: float | None = None  # Pa; None takes the material preset
    mu0: float | None = None
    activations: int = 3
    sensors: int = 20
    subdomains: int = 50
    activation_width: float = 0.01
    noise_variance: float = 1e-3
    correlation_length: float = 0.1
    prior_std_lambda: float = 1.0
    prior_std_mu: float = 1.0
    prior_jitter: float = 1e-6
    algorithm: str = "exhaustive"
    grid_points: int = 40
    mesh_elements: int = 1632
    corner_radius: float = 1e-3
    modulus_unit_pa: float = 1e9  # internal Lame unit (GPa)
    measurement_gain: float = 1e4  # sensor calibration: recorded units per raw reading
    seed: int = 0
    outdir: str = "run-artifacts"

    def validate(self) -> None:
        if self.lambda0 is None or self.mu0 is None:
            if self.material not in MATERIALS:
                raise ConfigError(
                    f"unknown material {self.material!r}; choose one of {sorted(MATERIALS)} "
                    "or give explicit lambda0/mu0"
                )
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        positive = {
            "activations": self.activations,
            "sensors": self.sensors,
            "subdomains": self.subdomains,
            "activation_width": self.activation_width,
            "noise_variance": self.noise_variance,
            "correlation_length": self.correlation_length,
            "prior_std_lambda": self.prior_std_lambda,
            "prior_std_mu": self.prior_std_mu,
            "corner_radius": self.corner_radius,
            "modulus_unit_pa": self.modulus_unit_pa,
            "measurement_gain": self.measurement_gain,
            "mesh_elements": self.mesh_elements,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        lam, mu = self.lame_pa()
        if not (lam > 0 and mu > 0):
            raise ConfigError(f"Lame parameters must be positive, got ({lam}, {mu})")
        if self.algorithm in ("exhaustive", "greedy", "enhanced") and self.grid_points < 2:
            raise ConfigError("grid searches need grid_points >= 2")

    def lame_pa(self) -> tuple[float, float]:
        if self.lambda0 is not None and self.mu0 is not None:
            return float(self.lambda0), float(self.mu0)
        return MATERIALS[self.material]

    def resolved(self) -> dict:
        """Flat key -> value mapping with no unresolved fields."""
        out = asdict(self)
        lam, mu = self.lame_pa()
        out["lambda0"] = lam
        out["mu0"] = mu
        return out


class Experiment:
    """Built solver stack plus the design objective and its gradient.

    The objective canonicalizes the design by sorting before stacking, which
    makes permuted designs bitwise identical evaluations; the gradient is
    mapped back to the caller's component order.
    """

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.geometry = BoundaryGeometry(radius=config.corner_radius)
        self.shape = ActivationShape(sigma=config.activation_width)
        self.mesh = build_mesh(self.geometry, config.mesh_elements)
        self.partition = build_subdomains(self.mesh, config.subdomains)
        lam_pa, mu_pa = config.lame_pa()
        unit = config.modulus_unit_pa
        self.lame = LameBackground(lam_pa / unit, mu_pa / unit)
        self.operator = assemble_stiffness(self.mesh, self.lame)
        self.sensors = precompute_sensors(
            self.mesh, self.operator, config.sensors, self.shape
        )
        self.assembler = LinearizedMapAssembler(
            self.mesh, self.partition, self.operator, self.shape, self.sensors
        )
        self.prior = build_prior(
            self.partition.midpoints,
            config.correlation_length,
            config.prior_std_lambda,
            config.prior_std_mu,
            jitter=config.prior_jitter,
        )
        self.weights = roi_weights(roi_mask(self.partition))

    @property
    def circumference(self) -> float:
        return self.geometry.circumference

    def scaled_map(self, design) -> np.ndarray:
        return self.config.measurement_gain * self.assembler.stack(design).matrix

    def _canonical(self, design) -> np.ndarray:
        """Positions reduced to [0, L) and sorted: the canonical stacking
        order, so permuted or period-shifted designs evaluate identically."""
        design = np.atleast_1d(np.asarray(design, dtype=float))
        return np.sort(np.mod(design, self.circumference))

    def objective(self, design) -> float:
        return a_optimality_target(
            self.scaled_map(self._canonical(design)),
            self.prior,
            self.config.noise_variance,
            self.weights,
        )

    def prepare(self, designs) -> None:
        """Batch-assemble the blocks a set of candidate designs will need."""
        self.assembler.warm_up(np.unique(np.asarray(designs, dtype=float).ravel()))

    def gradient(self, design) -> np.ndarray:
        design = np.mod(np.atleast_1d(np.asarray(design, dtype=float)), self.circumference)
        order = np.argsort(design)
        canon = design[order]
        F = self.scaled_map(canon)
        dblocks = self.config.measurement_gain * self.assembler.derivative_blocks(canon)
        g = a_optimality_gradient(
            F, dblocks, self.prior, self.config.noise_variance, self.weights
        )
        out = np.empty_like(g)
        out[order] = g
        return out

    def equidistant_start(self) -> np.ndarray:
        k = self.config.activations
        L = self.circumference
        return (np.arange(k) * L + L / 2.0) / k

    def search_objective(self):
        """Objective callable carrying the batch-preparation hook."""

        def obj(design):
            return self.objective(design)

        obj.prepare = self.prepare
        return obj

    def run_search(self) -> tuple[np.ndarray, OptimizationTrace]:
        cfg = self.config
        L = self.circumference
        objective = self.search_objective()
        if cfg.algorithm in ("exhaustive", "greedy", "enhanced"):
            grid = np.arange(cfg.grid_points) * (L / cfg.grid_points)
            self.assembler.warm_up(grid)
        if cfg.algorithm == "exhaustive":
            return exhaustive_search(objective, cfg.activations, cfg.grid_points, L)
        if cfg.algorithm == "greedy":
            return greedy_sequential(objective, cfg.activations, cfg.grid_points, L)
        if cfg.algorithm == "enhanced":
            return enhanced_sequential(
                objective,
                self.gradient,
                cfg.activations,
                cfg.grid_points,
                L,
                GradientDescentConfig.default(L),
            )
        # gradient descent from the reproducible near-equidistant start
        return gradient_descent(
            objective,
            self.gradient,
            self.equidistant_start(),
            GradientDescentConfig.default(L),
        )


@dataclass
class RunArtifacts:
    """Paths of the files a run writes."""

    config: Path
    trace: Path
    design: Path
    outline: Path
    mesh: Path


def write_config_file(config: ExperimentConfig, path: Path) -> None:
    lines = []
    for key, value in config.resolved().items():
        if isinstance(value, float):
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")


def write_trace_file(trace: OptimizationTrace, k_activations: int, path: Path) -> None:
    cols = ["iteration", "phase"] + [f"p_{i + 1}" for i in range(k_activations)] + ["phi_A"]
    rows = [",".join(cols)]
    for rec in trace.records:
        padded = list(rec.design) + [np.nan] * (k_activations - len(rec.design))
        cells = [str(rec.iteration), rec.phase]
        cells += [_fmt(p) for p in padded]
        cells.append(_fmt(rec.value))
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")


def write_design_file(design: np.ndarray, value: float, path: Path) -> None:
    cols = [f"p_{i + 1}" for i in range(len(design))] + ["phi_A"]
    row = [_fmt(p) for p in design] + [_fmt(value)]
    path.write_text(",".join(cols) + "\n" + ",".join(row) + "\n")


def write_outline_file(geometry: BoundaryGeometry, path: Path) -> None:
    L = geometry.circumference
    ts = np.arange(OUTLINE_SAMPLES) * (L / OUTLINE_SAMPLES)
    pts = boundary_point(geometry, ts)
    rows = ["t,x,y"]
    rows += [f"{_fmt(t)},{_fmt(x)},{_fmt(y)}" for t, (x, y) in zip(ts, pts)]
    path.write_text("\n".join(rows) + "\n")


def run_experiment(config: ExperimentConfig) -> tuple[RunArtifacts, np.ndarray, OptimizationTrace]:
    """Execute precompute, search, and artifact writing for one configuration."""
    start = time.perf_counter()
    experiment = Experiment(config)
    log.info(
        "built experiment: %d elements, %d sensors, %d subdomains",
        experiment.mesh.n_elements,
        config.sensors,
        config.subdomains,
    )
    design, trace = experiment.run_search()
    design = np.sort(design)
    final_value = experiment.objective(design)
    elapsed = time.perf_counter() - start
    log.info(
        "search %s finished: %d objective evaluations, phi_a = %s, %.2f s",
        config.algorithm,
        trace.evaluations,
        _fmt(final_value),
        elapsed,
    )

    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = RunArtifacts(
        config=outdir / "config.txt",
        trace=outdir / "trace.csv",
        design=outdir / "design.csv",
        outline=outdir / "outline.csv",
        mesh=outdir / "mesh.txt",
    )
    write_config_file(config, artifacts.config)
    write_trace_file(trace, config.activations, artifacts.trace)
    write_design_file(design, final_value, artifacts.design)
    write_outline_file(experiment.geometry, artifacts.outline)
    write_mesh_file(experiment.mesh, artifacts.mesh, experiment.partition)
    return artifacts, design, trace


def evaluate_design(config: ExperimentConfig, design) -> float:
    """Single objective evaluation with full provenance via the config echo."""
    design = np.atleast_1d(np.asarray(design, dtype=float))
    if design.size != config.activations:
        raise ConfigError(
            f"design has {design.size} positions but the configuration asks for "
            f"{config.activations} activations"
        )
    return Experiment(config).objective(design)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--material", default="acryl", choices=sorted(MATERIALS))
    parser.add_argument("--lambda0", type=float, default=None, help="Pa, overrides the preset")
    parser.add_argument("--mu0", type=float, default=None, help="Pa, overrides the preset")
    parser.add_argument("--activations", type=int, default=3)
    parser.add_argument("--sensors", type=int, default=20)
    parser.add_argument("--subdomains", type=int, default=50)
    parser.add_argument("--activation-width", type=float, default=0.01)
    parser.add_argument("--noise-variance", type=float, default=1e-3)
    parser.add_argument("--correlation-length", type=float, default=0.1)
    parser.add_argument("--prior-std-lambda", type=float, default=1.0)
    parser.add_argument("--prior-std-mu", type=float, default=1.0)
    parser.add_argument("--prior-jitter", type=float, default=1e-6)
    parser.add_argument("--algorithm", default="exhaustive", choices=ALGORITHMS)
    parser.add_argument("--grid-points", type=int, default=40)
    parser.add_argument("--mesh-elements", type=int, default=1632)
    parser.add_argument("--corner-radius", type=float, default=1e-3)
    parser.add_argument("--modulus-unit-pa", type=float, default=1e9)
    parser.add_argument("--measurement-gain", type=float, default=1e4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--outdir", default="run-artifacts")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kwargs = {}
    for f in fields(ExperimentConfig):
        kwargs[f.name] = getattr(args, f.name)
    return ExperimentConfig(**kwargs)


def _parse_design(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"cannot parse design {text!r}: {exc}") from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="elastodesign",
        description="A-optimal boundary pressure activation placement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a design search and write artifacts")
    _add_config_arguments(run_p)

    eval_p = sub.add_parser("evaluate", help="evaluate the objective for a given design")
    _add_config_arguments(eval_p)
    eval_p.add_argument("--design", required=True, help="comma-separated arclength positions")
    eval_p.add_argument("--report", default=None, help="optional report file path")

    mesh_p = sub.add_parser("export-mesh", help="write the mesh and outline files only")
    _add_config_arguments(mesh_p)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")

    try:
        config = _config_from_args(args)
        config.validate()
        if args.command == "run":
            artifacts, design, _ = run_experiment(config)
            print(f"design: {','.join(_fmt(p) for p in design)}")
            print(f"artifacts: {Path(config.outdir)}")
        elif args.command == "evaluate":
            design = _parse_design(args.design)
            value = evaluate_design(config, design)
            lines = [f"phi_a = {_fmt(value)}"]
            lines += [f"design_p_{i + 1} = {_fmt(p)}" for i, p in enumerate(design)]
            lines += [
                f"{key} = {_fmt(v) if isinstance(v, float) else v}"
                for key, v in config.resolved().items()
            ]
            report = "\n".join(lines) + "\n"
            if args.report:
                Path(args.report).parent.mkdir(parents=True, exist_ok=True)
                Path(args.report).write_text(report)
            print(report, end="")
        else:  # export-mesh
            experiment = Experiment(config)
            outdir = Path(config.outdir)
            outdir.mkdir(parents=True, exist_ok=True)
            write_mesh_file(experiment.mesh, outdir / "mesh.txt", experiment.partition)
            write_outline_file(experiment.geometry, outdir / "outline.csv")
            print(f"artifacts: {outdir}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, FemError, BayesError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
