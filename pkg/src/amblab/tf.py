"""Discretized signals and the core time-frequency transforms.

Signals live on a centered periodic grid ``t_k = (k - n/2) dx`` and their
Fourier duals on ``omega_l = (l - n/2) domega`` with ``domega = 1/(n dx)``.
On this grid the time-frequency shifts

    (pi(x, omega) f)(t) = exp(2 pi i t omega) f(t - x)

with ``x`` and ``omega`` on the lattice act exactly (circular translation
followed by a modulation that is itself n-periodic), so shift invariance of
``|A(f)|`` holds to rounding, not just asymptotically.

All integrals are Riemann sums with weight ``dx`` (time) or ``dx*domega``
(time-frequency plane).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import GridMismatch, InvalidDilation, OffGridShift, ZeroSignal, ZeroWindow

SHIFT_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    n: int
    dx: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n <= 0 or self.n % 2:
            raise ValueError(f"grid size must be a positive even integer, got {self.n}")
        if not (self.dx > 0 and np.isfinite(self.dx)):
            raise ValueError(f"grid step must be positive, got {self.dx}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dx", float(self.dx))

    @classmethod
    def square(cls, n: int) -> "TimeGrid":
        """Grid with ``dx == domega`` so the Fourier transform maps it to itself."""
        return cls(n, 1.0 / np.sqrt(n))

    @property
    def domega(self) -> float:
        return 1.0 / (self.n * self.dx)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(self.n) - self.n // 2

    @property
    def t(self) -> np.ndarray:
        return self.offsets * self.dx

    @property
    def omega(self) -> np.ndarray:
        return self.offsets * self.domega

    @property
    def cell_area(self) -> float:
        return self.dx * self.domega

    @property
    def time_box(self) -> tuple[float, float]:
        half = self.n * self.dx / 2
        return -half, half

    @property
    def freq_box(self) -> tuple[float, float]:
        half = 1.0 / (2 * self.dx)
        return -half, half

    def dual(self) -> "TimeGrid":
        return TimeGrid(self.n, self.domega)

    def time_index(self, x: float) -> int:
        """Integer number of time samples in ``x``; raises if ``x`` is off-grid."""
        return _lattice_steps(x, self.dx, "time")

    def freq_index(self, omega: float) -> int:
        return _lattice_steps(omega, self.domega, "frequency")

    def to_json(self) -> dict:
        return {"n": self.n, "dx": self.dx}


def _lattice_steps(value: float, step: float, what: str) -> int:
    ratio = value / step
    steps = int(np.rint(ratio))
    if abs(ratio - steps) > SHIFT_TOL:
        raise OffGridShift(f"{what} shift {value!r} is not a multiple of the grid step {step!r}")
    return steps


@dataclass(frozen=True)
class PhasePoint:
    x: float
    omega: float

    def __iter__(self):
        return iter((self.x, self.omega))

    def __neg__(self) -> "PhasePoint":
        return PhasePoint(-self.x, -self.omega)

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.x + other.x, self.omega + other.omega)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.x - other.x, self.omega - other.omega)

    def norm(self) -> float:
        return float(np.hypot(self.x, self.omega))


@dataclass(frozen=True, eq=False)
class Signal:
    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.shape != (self.grid.n,):
            raise GridMismatch(f"expected {self.grid.n} samples, got shape {samples.shape}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dx)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def normalized(self) -> "Signal":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroSignal("cannot normalize the zero signal")
        return Signal(self.grid, self.samples / nrm)

    def inner(self, other: "Signal") -> complex:
        """Grid inner product ``<self, other> = sum self * conj(other) dx``."""
        _same_grid(self, other)
        return complex(np.sum(self.samples * np.conj(other.samples)) * self.grid.dx)

    def __mul__(self, c) -> "Signal":
        return Signal(self.grid, self.samples * c)

    __rmul__ = __mul__

    def __add__(self, other: "Signal") -> "Signal":
        _same_grid(self, other)
        return Signal(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Signal") -> "Signal":
        _same_grid(self, other)
        return Signal(self.grid, self.samples - other.samples)

    def leakage(self, frac: float = 0.1) -> float:
        """Fraction of energy in the outer ``frac`` of samples at each end."""
        return _edge_ratio(np.abs(self.samples) ** 2, frac)


@dataclass(frozen=True, eq=False)
class TFArray:
    """Complex values on the time-frequency lattice; ``values[k, l]`` sits at ``(t_k, omega_l)``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        n = self.grid.n
        if values.shape != (n, n):
            raise GridMismatch(f"expected {(n, n)} array, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.grid.t

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def cell_area(self) -> float:
        return self.grid.cell_area

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def leakage(self, frac: float = 0.1) -> float:
        """Fraction of ``sum |F|^2`` lying in the outer frame of the array."""
        return _edge_ratio(np.abs(self.values) ** 2, frac)


def _edge_ratio(mass: np.ndarray, frac: float) -> float:
    total = float(np.sum(mass))
    if total == 0:
        return 0.0
    w = max(1, int(round(frac * mass.shape[0])))
    inner = tuple(slice(w, s - w) for s in mass.shape)
    return float((total - np.sum(mass[inner])) / total)


def _same_grid(*signals) -> TimeGrid:
    grid = signals[0].grid
    for s in signals[1:]:
        if s.grid != grid:
            raise GridMismatch(f"grids differ: {grid} vs {s.grid}")
    return grid


# -- centered DFT helpers -----------------------------------------------------

def cdft(h: np.ndarray, axis: int = -1) -> np.ndarray:
    """sum_j h_j exp(-2 pi i (j - n/2)(l - n/2) / n) along ``axis``."""
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(h, axes=axis), axis=axis), axes=axis)


def cidft(h: np.ndarray, axis: int = -1) -> np.ndarray:
    """sum_l h_l exp(+2 pi i (j - n/2)(l - n/2) / n); no 1/n factor."""
    n = h.shape[axis]
    return n * np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(h, axes=axis), axis=axis), axes=axis)


@lru_cache(maxsize=16)
def shift_indices(n: int) -> np.ndarray:
    """``idx[k, j] = (j - (k - n/2)) mod n``: row k reads ``g(t_j - t_k)``."""
    j = np.arange(n)
    m = np.arange(n) - n // 2
    idx = (j[None, :] - m[:, None]) % n
    idx.setflags(write=False)
    return idx


def modulation_phase(grid: TimeGrid, omega_steps: int) -> np.ndarray:
    """exp(2 pi i t_j omega) for omega = omega_steps * domega, reduced exactly mod 1."""
    n = grid.n
    turns = np.mod(grid.offsets * omega_steps, n) / n
    return np.exp(2j * np.pi * turns)


# -- operations ---------------------------------------------------------------

def timefreq_shift(f: Signal, z: PhasePoint) -> Signal:
    m = f.grid.time_index(z.x)
    q = f.grid.freq_index(z.omega)
    out = np.roll(f.samples, m) * modulation_phase(f.grid, q)
    return Signal(f.grid, out)


def fourier(f: Signal) -> Signal:
    """Unitary centered DFT; the result lives on the dual grid (step ``domega``)."""
    return Signal(f.grid.dual(), f.grid.dx * cdft(f.samples))


def inverse_fourier(fhat: Signal) -> Signal:
    grid = fhat.grid.dual()
    return Signal(grid, fhat.grid.dx * cidft(fhat.samples))


def _check_pair(f: Signal, g: Signal) -> TimeGrid:
    grid = _same_grid(f, g)
    if not np.any(g.samples):
        raise ZeroWindow("window is identically zero")
    return grid


def stft(f: Signal, g: Signal) -> TFArray:
    """V_g f(t_k, omega_l) = <f, pi(t_k, omega_l) g>, one FFT per time row."""
    grid = _check_pair(f, g)
    return TFArray(grid, stft_rows(f, g, None))


def stft_rows(f: Signal, g: Signal, rows) -> np.ndarray:
    """Selected time rows of the STFT (all rows if ``rows`` is None)."""
    grid = _check_pair(f, g)
    idx = shift_indices(grid.n)
    if rows is not None:
        idx = idx[rows]
    prod = f.samples[None, :] * np.conj(g.samples[idx])
    return grid.dx * cdft(prod, axis=1)


@lru_cache(maxsize=16)
def ambiguity_phase(grid: TimeGrid) -> np.ndarray:
    """exp(pi i x_k omega_l) on the lattice."""
    o = grid.offsets
    ph = np.exp(1j * np.pi * np.outer(o, o) / grid.n)
    ph.setflags(write=False)
    return ph


@lru_cache(maxsize=16)
def adjoint_phase(grid: TimeGrid) -> np.ndarray:
    """exp(-2 pi i x_k omega_l), reduced exactly mod 1: pi(z)^* = adjoint_phase * pi(-z)."""
    o = grid.offsets
    ph = np.exp(-2j * np.pi * np.mod(np.outer(o, o), grid.n) / grid.n)
    ph.setflags(write=False)
    return ph


def cross_ambiguity(f: Signal, g: Signal) -> TFArray:
    v = stft(f, g)
    return TFArray(v.grid, ambiguity_phase(v.grid) * v.values)


def ambiguity(f: Signal) -> TFArray:
    return cross_ambiguity(f, f)


def stft_adjoint(F: np.ndarray, g: Signal, rows=None) -> Signal:
    """V_g^* F = sum_z F(z) pi(z) g dx domega, matrix-free.

    With ``rows`` given, ``F`` holds only those time rows and the rest are zero.
    """
    grid = g.grid
    n = grid.n
    F = np.asarray(F)
    idx = shift_indices(n)
    if rows is not None:
        idx = idx[rows]
    if F.shape != (idx.shape[0], n):
        raise GridMismatch(f"expected {(idx.shape[0], n)} array, got {F.shape}")
    # row k: (sum_l F[k,l] e^{2 pi i t omega_l}) * g(t - x_k)
    synth = cidft(F, axis=1) * g.samples[idx]
    return Signal(grid, np.sum(synth, axis=0) * grid.cell_area)


# -- band-limited evaluation --------------------------------------------------

def fractional_shift(f: Signal, s: float) -> np.ndarray:
    """Samples of the trigonometric interpolant of ``f`` at ``t_j - s``."""
    grid = f.grid
    spec = cdft(f.samples) * np.exp(-2j * np.pi * s * grid.omega)
    return cidft(spec) / grid.n


def bandlimited_eval(f: Signal, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary times."""
    grid = f.grid
    points = np.asarray(points, dtype=float)
    coeff = cdft(f.samples) / grid.n
    # coefficients are referenced to t = 0 through the centered DFT
    return np.exp(2j * np.pi * np.outer(points, grid.omega)) @ coeff


def ambiguity_at(f: Signal, x, omega) -> np.ndarray:
    """A(f)(x, omega) at arbitrary (possibly off-grid) points via band-limited shifts."""
    grid = f.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    x, omega = np.broadcast_arrays(x, omega)
    out = np.empty(x.shape, dtype=np.complex128)
    for xv in np.unique(x):
        sel = x == xv
        shifted = fractional_shift(f, xv)
        prod = f.samples * np.conj(shifted)
        kern = np.exp(-2j * np.pi * np.outer(omega[sel], grid.t))
        v = (kern @ prod) * grid.dx
        out[sel] = np.exp(1j * np.pi * xv * omega[sel]) * v
    return out


# -- metaplectic generators ---------------------------------------------------

@dataclass(frozen=True)
class Rotation:
    """The Fourier transform, implementing J = [[0, 1], [-1, 0]]."""

    def matrix(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class Dilation:
    lam: float

    def matrix(self) -> np.ndarray:
        return np.array([[1.0 / self.lam, 0.0], [0.0, self.lam]])


@dataclass(frozen=True)
class Chirp:
    c: float

    def matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [-self.c, 1.0]])


Metaplectic = Union[Rotation, Dilation, Chirp]


def metaplectic_apply(f: Signal, kind: Metaplectic) -> Signal:
    """Apply the metaplectic operator U with ``|A(U f)(z)| = |A(f)(kind.matrix() @ z)|``."""
    if isinstance(kind, Rotation):
        return fourier(f)
    if isinstance(kind, Dilation):
        lam = kind.lam
        if not lam > 0:
            raise InvalidDilation(f"dilation factor must be positive, got {lam}")
        src = f.grid.t / lam
        lo, hi = f.grid.time_box
        inside = (src >= lo) & (src < hi)
        # the interpolant is periodic; points mapped outside the box would alias
        vals = np.zeros(f.grid.n, dtype=np.complex128)
        vals[inside] = bandlimited_eval(f, src[inside]) / np.sqrt(lam)
        return Signal(f.grid, vals)
    if isinstance(kind, Chirp):
        t = f.grid.t
        return Signal(f.grid, f.samples * np.exp(1j * np.pi * kind.c * t * t))
    raise TypeError(f"unknown metaplectic generator {kind!r}")


# -- signals and windows ------------------------------------------------------

def gaussian(grid: TimeGrid, lam: float = 1.0, center: PhasePoint | None = None) -> Signal:
    """Unit-norm (in the continuum) Gaussian ``pi(center) f_lam`` sampled analytically.

    ``f_lam(t) = lam^{-1/2} 2^{1/4} exp(-pi t^2 / lam^2)``.
    """
    if not lam > 0:
        raise InvalidDilation(f"dilation factor must be positive, got {lam}")
    x0, w0 = (0.0, 0.0) if center is None else (center.x, center.omega)
    t = grid.t
    vals = 2 ** 0.25 / np.sqrt(lam) * np.exp(-np.pi * ((t - x0) / lam) ** 2)
    return Signal(grid, vals * np.exp(2j * np.pi * t * w0))


def random_signal(grid: TimeGrid, rng: np.random.Generator) -> Signal:
    """Complex white noise normalized to unit norm."""
    z = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    return Signal(grid, z).normalized()


def center_of_mass(f: Signal, g: Signal | None = None) -> PhasePoint:
    """First moments of the spectrogram ``|V_g f|^2`` (default window: standard Gaussian)."""
    if g is None:
        g = gaussian(f.grid)
    if not np.any(f.samples):
        raise ZeroSignal("center of mass of the zero signal is undefined")
    s = np.abs(stft(f, g).values) ** 2
    total = np.sum(s)
    x = np.sum(np.sum(s, axis=1) * f.grid.t) / total
    w = np.sum(np.sum(s, axis=0) * f.grid.omega) / total
    return PhasePoint(float(x), float(w))


def snap(grid: TimeGrid, z: PhasePoint) -> PhasePoint:
    """Nearest lattice point to ``z``."""
    return PhasePoint(
        float(np.rint(z.x / grid.dx) * grid.dx),
        float(np.rint(z.omega / grid.domega) * grid.domega),
    )
