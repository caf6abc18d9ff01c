"""Linearized sensitivity of sensor readings to material perturbations.

Each activation position ``p`` contributes an M-by-2N block whose entries are
negated perturbation bilinear forms of the activation's displacement field
against the precomputed sensor fields: columns 1..N hold the first-parameter
(lambda) sensitivities, columns N+1..2N the second-parameter (mu) ones.  The
derivative block with respect to ``p`` replaces the activation field by the
solution driven by the position-derivative load.  Everything is evaluated at
the fixed background material, so one factorization and one set of sensor
solves serve the whole design search.
"""

from __future__ import annotations

import bisect
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import StiffnessOperator, assemble_load, element_strains, element_tables
from .geometry import (
    ActivationShape,
    activation_field,
    activation_position_derivative,
)
from .meshing import Mesh, SubdomainPartition

__all__ = [
    "SensorSet",
    "LinearizedMap",
    "LinearizedMapAssembler",
    "precompute_sensors",
    "synth_measure",
]

_CACHE_LIMIT = 4096  # cached blocks (16 kB each at default sizes)


class _SnapCache:
    """LRU block cache keyed by position, with nearest-key snapping.

    Positions within ``tol`` of a cached key reuse its block: this realizes
    the coincidence-reuse rule and makes period-shifted positions (which
    differ by one rounding ulp after reduction) bitwise identical.
    """

    def __init__(self, tol: float, limit: int = _CACHE_LIMIT):
        self.tol = tol
        self.limit = limit
        self._data: OrderedDict[float, np.ndarray] = OrderedDict()
        self._keys: list[float] = []  # sorted view of _data keys

    def _snap(self, p: float) -> float | None:
        i = bisect.bisect_left(self._keys, p)
        best, dist = None, self.tol
        for j in (i - 1, i):
            if 0 <= j < len(self._keys) and abs(self._keys[j] - p) <= dist:
                best, dist = self._keys[j], abs(self._keys[j] - p)
        return best

    def get(self, p: float) -> np.ndarray | None:
        key = self._snap(p)
        if key is None:
            return None
        self._data.move_to_end(key)
        return self._data[key]

    def put(self, p: float, value: np.ndarray) -> None:
        if self._snap(p) is not None:
            return
        self._data[p] = value
        bisect.insort(self._keys, p)
        while len(self._data) > self.limit:
            old, _ = self._data.popitem(last=False)
            self._keys.remove(old)


@dataclass
class SensorSet:
    """Equidistant boundary sensors and their solved displacement fields."""

    positions: np.ndarray  # (M,) arclength positions, (m-1) * L / M
    loads: np.ndarray  # (ndofs, M) boundary functionals of the sensors
    fields: np.ndarray  # (ndofs, M) displacement solutions at the background

    @property
    def count(self) -> int:
        return self.positions.size


@dataclass
class LinearizedMap:
    """Stacked sensitivity matrix for a design of K activation positions."""

    design: np.ndarray  # (K,)
    matrix: np.ndarray  # (K*M, 2N)
    sensor_count: int

    def block(self, k: int) -> np.ndarray:
        m = self.sensor_count
        return self.matrix[k * m : (k + 1) * m]


def precompute_sensors(
    mesh: Mesh,
    operator: StiffnessOperator,
    count: int,
    shape: ActivationShape,
) -> SensorSet:
    """Solve the sensor fields once; independent of any design."""
    if count < 1:
        raise ValueError(f"sensor count must be >= 1, got {count}")
    L = mesh.geometry.circumference
    positions = np.arange(count) * (L / count)
    loads = np.column_stack(
        [
            assemble_load(mesh, lambda t, p=p: activation_field(mesh.geometry, shape, p, t))
            for p in positions
        ]
    )
    fields = operator.solve(loads)
    return SensorSet(positions=positions, loads=loads, fields=fields)


class LinearizedMapAssembler:
    """Builds sensitivity blocks, their position derivatives, and stacks.

    Blocks are memoized per exact position value (bounded LRU); distinct
    positions may be assembled concurrently, the cache is lock-protected.
    An activation that coincides with a sensor position (circular distance
    below ``1e-12 * L``) reuses the cached sensor field instead of solving.
    """

    def __init__(
        self,
        mesh: Mesh,
        partition: SubdomainPartition,
        operator: StiffnessOperator,
        shape: ActivationShape,
        sensors: SensorSet,
    ):
        self.mesh = mesh
        self.partition = partition
        self.operator = operator
        self.shape = shape
        self.sensors = sensors
        self.geometry = mesh.geometry

        w = element_tables(mesh).weights  # (ne, 7)
        eps = element_strains(mesh, sensors.fields)  # (M, ne, 7, 3)
        # Fold quadrature weights and the sym-grad doubling into the sensor
        # tables so a block is two einsum contractions per field.
        self._mu_table = w[None, :, :, None] * eps * np.array([2.0, 2.0, 1.0])
        self._div_table = w[None, :, :] * (eps[..., 0] + eps[..., 1])  # (M, ne, 7)

        ne = mesh.n_elements
        self._reduce = sp.csr_matrix(
            (np.ones(ne), (np.arange(ne), partition.labels)),
            shape=(ne, partition.count),
        )

        self._lock = threading.Lock()
        tol = 1e-12 * mesh.geometry.circumference
        self._blocks = _SnapCache(tol)
        self._dblocks = _SnapCache(tol)

    @property
    def basis_size(self) -> int:
        return 2 * self.partition.count

    def readings(self, coeffs: np.ndarray) -> np.ndarray:
        """Sensor readings of a displacement field (or a stack of fields)."""
        return self.sensors.loads.T @ coeffs

    # -- displacement fields ------------------------------------------------

    def _activation_load(self, p: float) -> np.ndarray:
        return assemble_load(
            self.mesh, lambda t: activation_field(self.geometry, self.shape, p, t)
        )

    def _derivative_load(self, p: float) -> np.ndarray:
        return assemble_load(
            self.mesh,
            lambda t: activation_position_derivative(self.geometry, self.shape, p, t),
        )

    def _canonical(self, p: float) -> float:
        """Reduce a position to [0, L); block caches key on the reduced value."""
        return float(np.mod(p, self.geometry.circumference))

    def _matching_sensor(self, p: float) -> int | None:
        L = self.geometry.circumference
        d = np.abs(self.sensors.positions - p)
        d = np.minimum(d, L - d)
        m = int(np.argmin(d))
        return m if d[m] <= 1e-12 * L else None

    def displacement(self, p: float) -> np.ndarray:
        """Displacement field of the activation at ``p`` (cache-aware)."""
        p = self._canonical(p)
        m = self._matching_sensor(p)
        if m is not None:
            return self.sensors.fields[:, m]
        return self.operator.solve(self._activation_load(p))

    # -- blocks --------------------------------------------------------------

    def _fields_to_blocks(self, coeffs: np.ndarray) -> np.ndarray:
        """Sensitivity blocks of solved fields, (nf, M, 2N)."""
        eps = element_strains(self.mesh, coeffs)  # (nf, ne, 7, 3)
        lam = np.einsum("meq,feq->fme", self._div_table, eps[..., 0] + eps[..., 1])
        mu = np.einsum("meqr,feqr->fme", self._mu_table, eps, optimize=True)
        nf, M, _ = lam.shape
        n = self.partition.count
        blocks = np.empty((nf, M, 2 * n))
        blocks[:, :, :n] = -(lam.reshape(nf * M, -1) @ self._reduce).reshape(nf, M, n)
        blocks[:, :, n:] = -(mu.reshape(nf * M, -1) @ self._reduce).reshape(nf, M, n)
        return blocks

    def _cache_get(self, cache: _SnapCache, p: float) -> np.ndarray | None:
        with self._lock:
            return cache.get(p)

    def _cache_put(self, cache: _SnapCache, p: float, value: np.ndarray) -> None:
        with self._lock:
            cache.put(p, value)

    def block(self, p: float) -> np.ndarray:
        """Sensitivity block F(p), shape (M, 2N); L-periodic in p."""
        p = self._canonical(p)
        hit = self._cache_get(self._blocks, p)
        if hit is not None:
            return hit
        value = self._fields_to_blocks(self.displacement(p)[:, None])[0]
        self._cache_put(self._blocks, p, value)
        return value

    def block_derivative(self, p: float) -> np.ndarray:
        """Position derivative dF/dp at ``p``, shape (M, 2N); L-periodic in p."""
        p = self._canonical(p)
        hit = self._cache_get(self._dblocks, p)
        if hit is not None:
            return hit
        field = self.operator.solve(self._derivative_load(p))
        value = self._fields_to_blocks(field[:, None])[0]
        self._cache_put(self._dblocks, p, value)
        return value

    def warm_up(self, positions) -> None:
        """Batch-assemble blocks for many positions (one multi-rhs solve)."""
        missing = [
            q
            for q in (self._canonical(p) for p in positions)
            if self._cache_get(self._blocks, q) is None
        ]
        if not missing:
            return
        loads = np.column_stack([self._activation_load(p) for p in missing])
        fields = self.operator.solve(loads)
        blocks = self._fields_to_blocks(fields)
        for p, b in zip(missing, blocks):
            self._cache_put(self._blocks, p, b)

    def stack(self, design) -> LinearizedMap:
        """Stacked map for a design vector; row block k depends on p_k only."""
        design = np.atleast_1d(np.asarray(design, dtype=float))
        if design.size < 1:
            raise ValueError("design must contain at least one activation")
        matrix = np.concatenate([self.block(p) for p in design], axis=0)
        return LinearizedMap(
            design=design.copy(), matrix=matrix, sensor_count=self.sensors.count
        )

    def derivative_blocks(self, design) -> np.ndarray:
        """dF/dp_k blocks for every design component, (K, M, 2N)."""
        design = np.atleast_1d(np.asarray(design, dtype=float))
        return np.stack([self.block_derivative(p) for p in design])


def synth_measure(
    lmap: LinearizedMap, alpha: np.ndarray, noise_std: float, seed: int
) -> np.ndarray:
    """Synthetic measurement y = F alpha + Gaussian noise, reproducible."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    alpha = np.asarray(alpha, dtype=float)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_std, lmap.matrix.shape[0]) if noise_std > 0 else 0.0
    return lmap.matrix @ alpha + noise
