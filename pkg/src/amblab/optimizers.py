"""Maximization drivers for the concentration functionals."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import functionals as fn
from . import tf
from .domains import DomainMask
from .errors import AmblabError, NoConvergence, NonFiniteObjective
from .tf import PhasePoint, Signal, TimeGrid

log = logging.getLogger(__name__)

RECENTER_TOL = 1e-9


@dataclass(frozen=True)
class Start:
    kind: str = "random"  # random | gaussian | file
    lam: float = 1.0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("random", "gaussian", "file"):
            raise ValueError(f"unknown start kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ValueError("file start needs a path")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "ProjGrad"
    max_iters: int = 10000
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    tol_grad: float = 1e-7
    tol_obj: float = 1e-10
    recenter_every: int = 10
    seed: int = 0
    start: Start = field(default_factory=Start)

    def __post_init__(self):
        if self.method not in ("ProjGrad", "PowerIter", "SelfConsistent", "GaussianScan"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.max_iters <= 0 or self.step0 <= 0:
            raise ValueError("max_iters and step0 must be positive")
        if not 0 < self.armijo_shrink < 1 or self.armijo_c <= 0:
            raise ValueError("Armijo parameters need c > 0 and 0 < shrink < 1")
        if self.tol_grad <= 0 or self.tol_obj <= 0:
            raise ValueError("tolerances must be positive")
        if self.recenter_every < 0:
            raise ValueError("recenter_every must be >= 0")


@dataclass
class RunReport:
    objective_trace: list
    grad_norm_trace: list
    recenter_shifts: list
    final_signal: Signal
    status: str
    wall_time: float
    seed: int = 0
    method: str = "ProjGrad"

    @property
    def final_objective(self) -> float:
        return max(self.objective_trace) if self.method == "SelfConsistent" else self.objective_trace[-1]

    def to_json(self) -> dict:
        """Deterministic content only; wall time goes to the run manifest."""
        return {
            "method": self.method,
            "seed": self.seed,
            "status": self.status,
            "iterations": len(self.objective_trace) - 1,
            "final_objective": self.final_objective,
            "objective_trace": list(map(float, self.objective_trace)),
            "grad_norm_trace": list(map(float, self.grad_norm_trace)),
            "recenter_shifts": [[z.x, z.omega] for z in self.recenter_shifts],
        }


def initial_signal(cfg: OptimizerConfig, grid: TimeGrid) -> Signal:
    start = cfg.start
    if start.kind == "gaussian":
        return tf.gaussian(grid, start.lam).normalized()
    if start.kind == "file":
        from .io import read_signal

        f = read_signal(start.path)
        if f.grid != grid:
            raise AmblabError(f"start signal grid {f.grid} differs from run grid {grid}")
        return f.normalized()
    return tf.random_signal(grid, np.random.default_rng(cfg.seed))


def _shift_invariant(spec) -> bool:
    if isinstance(spec, (fn.AmbiguityLp, fn.AmbiguityLinf, fn.TimeCorrelationLp)):
        return True
    return isinstance(spec, fn.MqNormalizedLp) and spec.norm == "continuous"


def _checked(value: float) -> float:
    if not np.isfinite(value):
        raise NonFiniteObjective(f"objective evaluated to {value}")
    return value


def proj_grad_ascent(spec, cfg: OptimizerConfig, grid: TimeGrid,
                     start: Optional[Signal] = None) -> RunReport:
    """Riemannian gradient ascent on the unit sphere with Armijo backtracking.

    Each accepted step is renormalized; every ``recenter_every`` iterations the
    iterate is moved back by its spectrogram center of mass (snapped to the
    lattice), which leaves shift-invariant objectives unchanged.
    """
    t0 = time.perf_counter()
    f = (initial_signal(cfg, grid) if start is None else start).normalized()
    recenter = cfg.recenter_every if _shift_invariant(spec) else 0
    if cfg.recenter_every and not recenter:
        log.info("objective %s is not shift invariant; recentering disabled", type(spec).__name__)

    J = _checked(fn.evaluate(spec, f))
    grad = fn.gradient(spec, f)
    gn = grad.norm()
    obj, gnorms, shifts = [J], [gn], []
    step = cfg.step0
    status = "MaxIters"
    for it in range(cfg.max_iters):
        if gn < cfg.tol_grad:
            status = "Converged"
            break
        t = step
        while True:
            cand = (f + t * grad).normalized()
            Jc = _checked(fn.evaluate(spec, cand))
            if Jc >= J + cfg.armijo_c * t * gn * gn:
                break
            t *= cfg.armijo_shrink
            if t < 1e-14 * cfg.step0:
                cand = None
                break
        if cand is None:
            status = "Stalled"
            break
        f, J = cand, Jc
        step = t / cfg.armijo_shrink
        if recenter and (it + 1) % recenter == 0:
            z = tf.snap(grid, tf.center_of_mass(f))
            if z.x or z.omega:
                moved = tf.timefreq_shift(f, -z)
                J2 = fn.evaluate(spec, moved)
                if abs(J2 - J) > RECENTER_TOL * max(1.0, abs(J)):
                    raise AmblabError(f"recentering changed the objective by {abs(J2 - J):.3g}")
                f = moved
                shifts.append(z)
        grad = fn.gradient(spec, f)
        gn = grad.norm()
        obj.append(J)
        gnorms.append(gn)
        if len(obj) > 5 and obj[-1] - obj[-6] < cfg.tol_obj * abs(obj[-1]):
            status = "Converged"
            break
    return RunReport(obj, gnorms, shifts, f, status, time.perf_counter() - t0, cfg.seed, "ProjGrad")


# -- localization operator ----------------------------------------------------

def apply_localization(g: Signal, mask: DomainMask, f: Signal) -> Signal:
    """V_g^* (chi_mask V_g f)."""
    if not (g.grid == mask.grid == f.grid):
        from .errors import GridMismatch

        raise GridMismatch("window, mask and signal must share one grid")
    rows = mask.rows
    V = tf.stft_rows(f, g, rows)
    return tf.stft_adjoint(np.where(mask.mask[rows], V, 0), g, rows)


def localization_matrix(g: Signal, mask: DomainMask) -> np.ndarray:
    """Dense matrix of the localization operator in the orthonormal sample basis.

    Only meant as an oracle for small grids.
    """
    n = g.grid.n
    cols = [apply_localization(g, mask, Signal(g.grid, np.eye(n)[j])).samples for j in range(n)]
    return np.column_stack(cols)


def power_iteration(g: Signal, mask: DomainMask, tol: float = 1e-10, max_iters: int = 20000,
                    seed: int = 0, start: Optional[Signal] = None) -> tuple[float, Signal]:
    """Top eigenpair of V_g^* chi V_g; stops when ||T v - lambda v|| <= tol."""
    v = tf.random_signal(g.grid, np.random.default_rng(seed)) if start is None else start.normalized()
    for _ in range(max_iters):
        y = apply_localization(g, mask, v)
        lam = float(np.real(y.inner(v)))
        res = (y - lam * v).norm()
        if res <= tol:
            return lam, v
        ny = y.norm()
        if ny == 0:
            raise NoConvergence("iterate fell into the null space of the operator")
        v = y * (1.0 / ny)
    raise NoConvergence(f"power iteration did not reach residual {tol} in {max_iters} steps (last {res:.3g})")


def _top_eigvec(g: Signal, mask: DomainMask, start: Signal) -> tuple[float, Signal]:
    grid = g.grid
    dx = grid.dx

    def matvec(u):
        return apply_localization(g, mask, Signal(grid, np.ravel(u))).samples

    op = LinearOperator((grid.n, grid.n), matvec=matvec, dtype=np.complex128)
    vals, vecs = eigsh(op, k=1, which="LA", v0=start.samples * np.sqrt(dx), tol=1e-13)
    v = Signal(grid, vecs[:, 0] / np.sqrt(dx)).normalized()
    return float(vals[0]), v


def self_consistent(mask: DomainMask, cfg: OptimizerConfig, p: float = 2,
                    start: Optional[Signal] = None) -> RunReport:
    """Fixed-point sweep f <- top eigenvector of V_f^* chi V_f for the p = 2 problem."""
    if p != 2:
        raise ValueError("self-consistent iteration is defined for p = 2 only")
    t0 = time.perf_counter()
    grid = mask.grid
    f = (initial_signal(cfg, grid) if start is None else start).normalized()
    J = fn.objective_ambiguity(f, mask, 2)
    obj, gnorms = [J], [fn.gradient_ambiguity(f, mask, 2).norm()]
    best, best_J = f, J
    status = "Stalled"
    for _ in range(cfg.max_iters):
        _, v = _top_eigvec(f, mask, f)
        # fix the global phase so successive iterates are comparable
        ph = v.inner(f)
        if abs(ph):
            v = v * (np.conj(ph) / abs(ph))
        f = v
        J = _checked(fn.objective_ambiguity(f, mask, 2))
        obj.append(J)
        gnorms.append(fn.gradient_ambiguity(f, mask, 2).norm())
        if J > best_J:
            best, best_J = f, J
        if abs(obj[-1] - obj[-2]) < cfg.tol_obj * abs(J):
            status = "Converged"
            break
    return RunReport(obj, gnorms, [], best, status, time.perf_counter() - t0, cfg.seed, "SelfConsistent")


# -- Gaussian baseline ----------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AMBLAB_THREADS", "1")))
    except ValueError:
        return 1


def gaussian_family_scan(spec, grid: TimeGrid, lam_grid: Sequence[float],
                         centers: Optional[Sequence[PhasePoint]] = None,
                         tie_rtol: float = 1e-12) -> tuple[float, dict]:
    """Exhaustive evaluation of ``spec`` on dilated, shifted Gaussians.

    Parameters are visited in lexicographic order ``(lam, x, omega)``; a later
    candidate replaces the incumbent only if it is better by more than
    ``tie_rtol`` (relative), so near-ties resolve to the smallest parameters.
    """
    lams = sorted(float(l) for l in lam_grid)
    if not lams:
        raise ValueError("lambda grid is empty")
    pts = sorted(centers or [PhasePoint(0.0, 0.0)], key=lambda z: (z.x, z.omega))
    params = [(lam, z) for lam in lams for z in pts]

    def score(pz):
        lam, z = pz
        return fn.evaluate(spec, tf.gaussian(grid, lam, z))

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(score, params))
    else:
        values = [score(pz) for pz in params]

    best_i = 0
    for i, v in enumerate(values):
        if v > values[best_i] * (1 + tie_rtol):
            best_i = i
    lam, z = params[best_i]
    return values[best_i], {"lam": lam, "center": z}
