"""Concentration functionals on a time-frequency domain and their gradients.

Gradients are Riesz representers for the real inner product
``Re <u, v> = Re sum u conj(v) dx``, so the directional derivative of an
objective ``J`` at ``f`` along ``v`` is ``Re <grad J(f), v>``.  They are
assembled matrix-free: one forward STFT plus one or two synthesis passes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from . import tf
from .domains import DomainMask, DomainSpec, Interval, TimeMask, rasterize, rasterize_time
from .errors import GridMismatch, LatticeIncommensurate, TruncationLeakage, Unsupported, ZeroSignal
from .tf import Signal, TFArray, TimeGrid

GRAD_EPS = 1e-9
LEAKAGE_TOL = 1e-8


# -- objective specifications -------------------------------------------------

@dataclass(frozen=True)
class GaborLattice:
    a: float
    b: float
    R: Optional[int] = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("lattice steps must be positive")
        if self.R is not None and self.R < 1:
            raise ValueError("truncation radius must be a positive integer")

    @classmethod
    def default(cls, grid: TimeGrid, R: Optional[int] = None) -> "GaborLattice":
        """Lattice with both steps as close to 1/sqrt(2) as the grid allows."""
        s = 1 / np.sqrt(2)
        a = max(1, int(round(s / grid.dx))) * grid.dx
        b = max(1, int(round(s / grid.domega))) * grid.domega
        return cls(a, b, R)

    @property
    def density(self) -> float:
        return self.a * self.b

    def steps(self, grid: TimeGrid) -> tuple[int, int]:
        sa, sb = self.a / grid.dx, self.b / grid.domega
        ia, ib = int(round(sa)), int(round(sb))
        if ia < 1 or ib < 1 or abs(sa - ia) > 1e-9 or abs(sb - ib) > 1e-9:
            raise LatticeIncommensurate(
                f"lattice steps ({self.a}, {self.b}) are not integer multiples of the grid steps "
                f"({grid.dx}, {grid.domega})"
            )
        return ia, ib

    def indices(self, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of the lattice points kept after truncation."""
        ia, ib = self.steps(grid)
        half = grid.n // 2

        def axis(step):
            i = np.arange(-(half // step), (half - 1) // step + 1)
            if self.R is not None:
                i = i[np.abs(i) <= self.R]
            return i * step + half

        return axis(ia), axis(ib)


@dataclass(frozen=True)
class AmbiguityLp:
    p: float
    domain: DomainSpec


@dataclass(frozen=True)
class AmbiguityLinf:
    domain: DomainSpec


@dataclass(frozen=True)
class TimeCorrelationLp:
    p: float
    domain: Union[Interval, tuple]


@dataclass(frozen=True, eq=False)
class FixedWindowLp:
    p: float
    domain: DomainSpec
    window: Optional[Signal] = None


@dataclass(frozen=True, eq=False)
class MqNormalizedLp:
    p: float
    q: float
    domain: DomainSpec
    window: Optional[Signal] = None
    norm: Union[str, GaborLattice] = "continuous"

    def __post_init__(self):
        if not 0 < self.q < 2:
            raise ValueError(f"modulation exponent must satisfy 0 < q < 2, got {self.q}")


ObjectiveSpec = Union[AmbiguityLp, AmbiguityLinf, TimeCorrelationLp, FixedWindowLp, MqNormalizedLp]


@lru_cache(maxsize=64)
def _cached_mask(domain, grid: TimeGrid) -> DomainMask:
    return rasterize(domain, grid)


def mask_for(domain, grid: TimeGrid) -> DomainMask:
    if isinstance(domain, DomainMask):
        if domain.grid != grid:
            raise GridMismatch(f"mask grid {domain.grid} differs from {grid}")
        return domain
    return _cached_mask(domain, grid)


def _window(window: Optional[Signal], grid: TimeGrid) -> Signal:
    return tf.gaussian(grid) if window is None else window


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")


def _norm_sq(f: Signal) -> float:
    s = f.norm_sq()
    if s == 0:
        raise ZeroSignal("objective is undefined for the zero signal")
    return s


# -- basic norms --------------------------------------------------------------

def _power_sum(vals: np.ndarray, q: float) -> float:
    return float(np.sum(vals ** q))


def lp_on_domain(F: TFArray, mask: DomainMask, p: float) -> float:
    """(sum over mask cells of |F|^p * cell_area)^(1/p); ``p = inf`` gives the max."""
    if F.grid != mask.grid:
        raise GridMismatch(f"array grid {F.grid} differs from mask grid {mask.grid}")
    vals = np.abs(F.values[mask.mask])
    if np.isinf(p):
        return float(vals.max())
    _check_p(p)
    return (_power_sum(vals, p) * mask.cell_area) ** (1.0 / p)


def mq_norm_continuous(f: Signal, g: Signal, q: float) -> float:
    """||V_g f||_{L^q} over the whole lattice; a quasi-norm for q < 1."""
    if not q > 0:
        raise ValueError("q must be positive")
    vals = np.abs(tf.stft(f, g).values)
    if np.isinf(q):
        return float(vals.max())
    return (_power_sum(vals, q) * f.grid.cell_area) ** (1.0 / q)


def gabor_coefficients(f: Signal, g: Signal, lat: GaborLattice) -> np.ndarray:
    """<f, pi(lambda) g> on the truncated lattice, checking truncation leakage."""
    V = tf.stft(f, g).values
    rows, cols = lat.indices(f.grid)
    if lat.R is not None:
        leak = gabor_leakage(V, f.grid, lat)
        if leak > LEAKAGE_TOL:
            raise TruncationLeakage(
                f"{leak:.3g} of the spectrogram mass lies outside the truncated lattice (R={lat.R})"
            )
    return V[np.ix_(rows, cols)]


def gabor_leakage(V: np.ndarray, grid: TimeGrid, lat: GaborLattice) -> float:
    """Fraction of ``sum |V|^2`` outside the box covered by the kept lattice points."""
    mass = np.abs(V) ** 2
    total = float(np.sum(mass))
    if total == 0 or lat.R is None:
        return 0.0
    ia, ib = lat.steps(grid)
    o = grid.offsets
    keep_t = np.abs(o) <= (lat.R + 0.5) * ia
    keep_w = np.abs(o) <= (lat.R + 0.5) * ib
    inside = float(np.sum(mass[np.ix_(keep_t, keep_w)]))
    return max(0.0, (total - inside) / total)


def gabor_norm(f: Signal, g: Signal, lat: GaborLattice, q: float) -> float:
    if not q > 0:
        raise ValueError("q must be positive")
    c = np.abs(gabor_coefficients(f, g, lat))
    if np.isinf(q):
        return float(c.max())
    return _power_sum(c, q) ** (1.0 / q)


def amalgam_norm(F: TFArray, window_radius: float) -> float:
    """sup over window centers y of ||F * chi_{B(y, r)}||_{L^2}, on the periodic lattice."""
    grid = F.grid
    if window_radius < max(grid.dx, grid.domega):
        raise ValueError("window radius must be at least one grid cell")
    o = grid.offsets
    X, W = np.meshgrid(o * grid.dx, o * grid.domega, indexing="ij")
    disc = (X ** 2 + W ** 2 <= window_radius ** 2).astype(float)
    mass = np.abs(F.values) ** 2
    if not mass.any():
        return 0.0
    kernel = np.fft.ifftshift(disc)
    local = np.fft.ifft2(np.fft.fft2(mass) * np.conj(np.fft.fft2(kernel))).real
    return float(np.sqrt(max(local.max(), 0.0) * grid.cell_area))


# -- objectives ---------------------------------------------------------------

# Objectives only see |A(f)| = |V_f f|, so the phase factor is skipped, and
# only the time rows that meet the mask are transformed.

def _masked_abs(f: Signal, g: Signal, mask: DomainMask) -> np.ndarray:
    if f.grid != mask.grid:
        raise GridMismatch(f"signal grid {f.grid} differs from mask grid {mask.grid}")
    rows = mask.rows
    return np.abs(tf.stft_rows(f, g, rows)[mask.mask[rows]])


def _lp(vals: np.ndarray, p: float, area: float) -> float:
    if np.isinf(p):
        return float(vals.max())
    _check_p(p)
    return (_power_sum(vals, p) * area) ** (1.0 / p)


def objective_ambiguity(f: Signal, mask: DomainMask, p: float) -> float:
    """||A(f)||_{L^p(mask)} / ||f||^2."""
    s = _norm_sq(f)
    return _lp(_masked_abs(f, f, mask), p, mask.cell_area) / s


def objective_linf(f: Signal, mask: DomainMask) -> float:
    s = _norm_sq(f)
    return _lp(_masked_abs(f, f, mask), np.inf, mask.cell_area) / s


def autocorrelation(f: Signal) -> np.ndarray:
    """<f, T_{t_k} f> for every lag t_k on the centered grid (circular)."""
    F = np.fft.fft(f.samples)
    c = np.fft.ifft(np.abs(F) ** 2)
    return np.fft.fftshift(c) * f.grid.dx


def objective_timecorr(f: Signal, tmask: TimeMask, p: float) -> float:
    if tmask.grid != f.grid:
        raise GridMismatch("time mask grid differs from signal grid")
    _check_p(p)
    s = _norm_sq(f)
    r = np.abs(autocorrelation(f)[tmask.mask])
    return (_power_sum(r, p) * f.grid.dx) ** (1.0 / p) / s


def objective_fixed_window(f: Signal, g: Signal, mask: DomainMask, p: float) -> float:
    """||A(f, g)||_{L^p(mask)} / ||f||; the window is fixed so only f is normalized."""
    s = _norm_sq(f)
    if not np.any(g.samples):
        from .errors import ZeroWindow

        raise ZeroWindow("window is identically zero")
    return _lp(_masked_abs(f, g, mask), p, mask.cell_area) / np.sqrt(s)


def mq_norm(f: Signal, g: Signal, q: float, norm: Union[str, GaborLattice]) -> float:
    if isinstance(norm, GaborLattice):
        return gabor_norm(f, g, norm, q)
    if norm != "continuous":
        raise ValueError(f"unknown modulation norm flavor {norm!r}")
    return mq_norm_continuous(f, g, q)


def objective_mq(f: Signal, mask: DomainMask, p: float, q: float, g: Signal,
                 norm: Union[str, GaborLattice] = "continuous") -> float:
    """||A(f)||_{L^p(mask)} / ||f||_{M^q}^2."""
    _norm_sq(f)
    return _lp(_masked_abs(f, f, mask), p, mask.cell_area) / mq_norm(f, g, q, norm) ** 2


# -- gradients ----------------------------------------------------------------

def _weights(absval: np.ndarray, p: float, eps: float) -> np.ndarray:
    """|G|^{p-2}, smoothed as (|G|^2 + eps^2)^{(p-2)/2} when p < 2."""
    if p == 2:
        return np.ones_like(absval)
    if p < 2:
        return (absval ** 2 + eps ** 2) ** ((p - 2) / 2)
    return absval ** (p - 2)


def _flip(F: np.ndarray) -> np.ndarray:
    """F(-z) on the periodic lattice."""
    return np.roll(F[::-1, ::-1], 1, axis=(0, 1))


def _ambiguity_power_grad(f: Signal, mask: DomainMask, p: float, eps: float):
    """N = sum_mask |<f, pi(z) f>|^p dA together with its gradient."""
    grid = f.grid
    rows = mask.rows
    G = tf.stft_rows(f, f, rows)
    absG = np.abs(G)
    m = mask.mask[rows]
    N = _power_sum(absG[m], p) * grid.cell_area
    w = np.where(m, _weights(absG, p, eps), 0.0)
    # sum_z c(z) pi(z)^* f  with  pi(z)^* = exp(-2 pi i x omega) pi(-z)
    full = np.zeros((grid.n, grid.n), dtype=np.complex128)
    full[rows] = w * np.conj(G)
    neg = (grid.n - rows) % grid.n
    c = _flip(full)[neg] * tf.adjoint_phase(grid)[neg]
    grad = p * (tf.stft_adjoint(c, f, neg).samples + tf.stft_adjoint(w * G, f, rows).samples)
    return N, grad


def gradient_ambiguity(f: Signal, mask: DomainMask, p: float, eps: float = GRAD_EPS) -> Signal:
    """Gradient of ``||A(f)||_{L^p(mask)} / ||f||^2``; orthogonal to f by homogeneity."""
    _check_p(p)
    s = _norm_sq(f)
    N, gN = _ambiguity_power_grad(f, mask, p, eps)
    if N == 0:
        return Signal(f.grid, np.zeros(f.grid.n))
    val = N ** (1 / p)
    grad = (val / (p * N)) * gN / s - 2 * val * f.samples / s ** 2
    return Signal(f.grid, grad)


def _stft_power_grad(f: Signal, g: Signal, weight: np.ndarray, p: float, eps: float):
    """M = sum weight * |V_g f|^p and its gradient (weight already includes cell areas)."""
    V = tf.stft(f, g).values
    absV = np.abs(V)
    sel = weight != 0
    M = float(np.sum(weight[sel] * absV[sel] ** p))
    coef = np.where(sel, weight * _weights(absV, p, eps), 0.0) * V
    # stft_adjoint multiplies by the cell area, which the weight already carries
    grad = p * tf.stft_adjoint(coef, g).samples / f.grid.cell_area
    return M, grad


def gradient_fixed_window(f: Signal, g: Signal, mask: DomainMask, p: float,
                          eps: float = GRAD_EPS) -> Signal:
    _check_p(p)
    s = _norm_sq(f)
    N, gN = _stft_power_grad(f, g, mask.mask * f.grid.cell_area, p, eps)
    if N == 0:
        return Signal(f.grid, np.zeros(f.grid.n))
    val = N ** (1 / p)
    grad = (val / (p * N)) * gN / np.sqrt(s) - val * f.samples / s ** 1.5
    return Signal(f.grid, grad)


def _mq_weight(grid: TimeGrid, norm: Union[str, GaborLattice]) -> np.ndarray:
    if isinstance(norm, GaborLattice):
        rows, cols = norm.indices(grid)
        w = np.zeros((grid.n, grid.n))
        w[np.ix_(rows, cols)] = 1.0
        return w
    return np.full((grid.n, grid.n), grid.cell_area)


def gradient_mq(f: Signal, mask: DomainMask, p: float, q: float, g: Signal,
                norm: Union[str, GaborLattice] = "continuous", eps: float = GRAD_EPS) -> Signal:
    _check_p(p)
    _norm_sq(f)
    N, gN = _ambiguity_power_grad(f, mask, p, eps)
    M, gM = _stft_power_grad(f, g, _mq_weight(f.grid, norm), q, eps)
    if N == 0:
        return Signal(f.grid, np.zeros(f.grid.n))
    num = N ** (1 / p)
    den = M ** (2 / q)
    grad = (num / (p * N)) * gN / den - num * (2 / q) * gM / (M * den)
    return Signal(f.grid, grad)


# -- dispatch on ObjectiveSpec -----------------------------------------------

def evaluate(spec: ObjectiveSpec, f: Signal) -> float:
    grid = f.grid
    if isinstance(spec, AmbiguityLp):
        return objective_ambiguity(f, mask_for(spec.domain, grid), spec.p)
    if isinstance(spec, AmbiguityLinf):
        return objective_linf(f, mask_for(spec.domain, grid))
    if isinstance(spec, TimeCorrelationLp):
        return objective_timecorr(f, rasterize_time(spec.domain, grid), spec.p)
    if isinstance(spec, FixedWindowLp):
        return objective_fixed_window(f, _window(spec.window, grid), mask_for(spec.domain, grid), spec.p)
    if isinstance(spec, MqNormalizedLp):
        return objective_mq(f, mask_for(spec.domain, grid), spec.p, spec.q,
                            _window(spec.window, grid), spec.norm)
    raise TypeError(f"unknown objective {spec!r}")


def gradient(spec: ObjectiveSpec, f: Signal) -> Signal:
    grid = f.grid
    if isinstance(spec, AmbiguityLp):
        return gradient_ambiguity(f, mask_for(spec.domain, grid), spec.p)
    if isinstance(spec, FixedWindowLp):
        return gradient_fixed_window(f, _window(spec.window, grid), mask_for(spec.domain, grid), spec.p)
    if isinstance(spec, MqNormalizedLp):
        return gradient_mq(f, mask_for(spec.domain, grid), spec.p, spec.q,
                           _window(spec.window, grid), spec.norm)
    raise Unsupported(f"no gradient available for {type(spec).__name__}")


def domain_measure(spec: ObjectiveSpec, grid: TimeGrid) -> float:
    if isinstance(spec, TimeCorrelationLp):
        return rasterize_time(spec.domain, grid).measure()
    return mask_for(spec.domain, grid).measure()


def frame_warning(lat: GaborLattice) -> None:
    if lat.density >= 1:
        warnings.warn(
            f"lattice density a*b = {lat.density:.3g} >= 1: a Gaussian Gabor system is not a frame",
            stacklevel=2,
        )
