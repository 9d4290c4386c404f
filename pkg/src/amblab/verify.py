"""Numerical witnesses for the concentration results.

Each check returns a :class:`CheckReport` holding the measured quantities and
a pass/fail verdict. Defaults are the release acceptance settings.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import functionals as fn
from . import tf
from .domains import (
    Annulus,
    Ball,
    DomainMask,
    Interval,
    origin_density_positive,
    rasterize,
    rasterize_time,
)
from .errors import Unsupported
from .optimizers import _threads
from .tf import PhasePoint, Signal, TimeGrid

ORIGIN = PhasePoint(0.0, 0.0)
ROUNDOFF = 1e-12


@dataclass
class CheckReport:
    name: str
    passed: bool
    measured: list = field(default_factory=list)
    tolerance: float = 0.0
    details: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": [[label, _jsonable(v)] for label, v in self.measured],
            "tolerance": self.tolerance,
            "details": self.details,
        }


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _amb(sig: Signal) -> np.ndarray:
    if not np.any(sig.samples):
        return np.zeros((sig.grid.n, sig.grid.n), dtype=np.complex128)
    return tf.ambiguity(sig).values


# -- radar correlation --------------------------------------------------------

def check_radar_correlation(trials: int = 100, seed: int = 0, grid: Optional[TimeGrid] = None) -> CheckReport:
    """|A(f)(z)| < A(f)(0) for z != 0, for random unit-norm f."""
    if trials < 1:
        raise ValueError("need at least one trial")
    grid = grid or TimeGrid.square(128)
    rng = np.random.default_rng(seed)
    origin = (grid.n // 2, grid.n // 2)
    margins, argmax_ok = [], True
    for _ in range(trials):
        f = tf.random_signal(grid, rng)
        a = np.abs(tf.ambiguity(f).values)
        peak = a[origin]
        if np.unravel_index(np.argmax(a), a.shape) != origin:
            argmax_ok = False
        a[origin] = -np.inf
        margins.append(1.0 - a.max() / peak)
    g = tf.gaussian(grid)
    a = np.abs(tf.ambiguity(g).values)
    peak = a[origin]
    a[origin] = -np.inf
    gauss_second = a.max() / peak
    gauss_expected = np.exp(-np.pi * min(grid.dx, grid.domega) ** 2 / 2)
    min_margin = float(min(margins))
    passed = argmax_ok and min_margin > 0 and abs(gauss_second - gauss_expected) < 1e-8
    return CheckReport(
        "radar_correlation",
        passed,
        [
            ("trials", trials),
            ("min_margin", min_margin),
            ("gaussian_second_peak", gauss_second),
            ("gaussian_second_peak_expected", gauss_expected),
        ],
        0.0,
        "origin cell is the strict argmax of |A(f)| for every trial",
    )


# -- asymptotic decoupling ----------------------------------------------------

def _decoupling_grid() -> TimeGrid:
    return TimeGrid(512, 0.1)


def check_decoupling(f1: Optional[Signal] = None, f2: Optional[Signal] = None,
                     separations: Sequence[float] = (5.0, 10.0, 15.0, 20.0),
                     mask: Optional[DomainMask] = None, p: float = 4.0,
                     tol: float = 0.05) -> CheckReport:
    """Pythagorean limit (p = 2) and the p* bound for two profiles moved apart in time.

    The profiles are placed at ``(-D/2, 0)`` and ``(D/2, 0)``.
    """
    grid = f1.grid if f1 is not None else (mask.grid if mask is not None else _decoupling_grid())
    f1 = f1 if f1 is not None else tf.gaussian(grid)
    f2 = f2 if f2 is not None else tf.gaussian(grid)
    mask = mask if mask is not None else rasterize(Ball(ORIGIN, 3.0), grid)
    seps = [float(d) for d in separations]
    if any(b <= a for a, b in zip(seps, seps[1:])):
        raise ValueError("separations must be increasing")
    m = mask.mask
    area = mask.cell_area
    h1, h2 = _amb(f1), _amb(f2)
    ref2 = float((np.sum(np.abs(h1[m]) ** 2) + np.sum(np.abs(h2[m]) ** 2)) * area)
    pstar = min(p, p / (p - 1)) if p > 1 else 1.0

    def lp(vals, q):
        return float((np.sum(np.abs(vals[m]) ** q) * area) ** (1 / q))

    bound = (lp(h1, p) ** pstar + lp(h2, p) ** pstar) ** (1 / pstar)
    devs, full_devs, ratios = [], [], []
    for d in seps:
        za = tf.snap(grid, PhasePoint(-d / 2, 0.0))
        zb = tf.snap(grid, PhasePoint(d / 2, 0.0))
        ga = tf.timefreq_shift(f1, za)
        gb = tf.timefreq_shift(f2, zb)
        S = _amb(ga) + _amb(gb)
        devs.append(abs(lp(S, 2) ** 2 - ref2) / ref2 if ref2 else 0.0)
        full = _amb(ga + gb)
        full_devs.append(abs(lp(full, 2) ** 2 - ref2) / ref2 if ref2 else 0.0)
        ratios.append(lp(S, p) / bound if bound else 0.0)
    # non-increasing up to roundoff: once the overlap is gone the deviation sits at ~1e-14
    monotone = all(b <= a + ROUNDOFF for a, b in zip(devs, devs[1:]))
    pyth_ok = devs[-1] < tol and monotone
    bound_ok = ratios[-1] <= 1 + tol
    return CheckReport(
        "decoupling",
        pyth_ok and bound_ok,
        [
            ("separations", seps),
            ("pythagorean_deviation", devs),
            ("pythagorean_deviation_with_cross_terms", full_devs),
            ("deviation_monotone", monotone),
            ("p", p),
            ("p_star", pstar),
            ("lp_over_pstar_bound", ratios),
        ],
        tol,
        "deviation non-increasing in D and below tolerance at the largest separation; "
        "L^p norm of the summed ambiguities within (1 + tol) of the p* bound",
    )


# -- failure of weak upper semicontinuity -------------------------------------

def check_weak_usc_failure(f: Optional[Signal] = None, g: Optional[Signal] = None,
                           mask: Optional[DomainMask] = None,
                           shifts: Sequence[float] = (5.0, 10.0, 15.0),
                           tol: float = 0.05) -> CheckReport:
    """||A(f + pi(z) g)||^2 on the domain approaches ||A(f)||^2 + ||A(g)||^2 as |z| grows."""
    grid = next((s.grid for s in (f, g, mask) if s is not None), None) or TimeGrid(256, 0.15)
    f = f if f is not None else tf.gaussian(grid)
    g = g if g is not None else tf.gaussian(grid)
    mask = mask if mask is not None else rasterize(Ball(ORIGIN, 2.0), grid)
    m, area = mask.mask, mask.cell_area

    def energy(sig):
        return float(np.sum(np.abs(_amb(sig)[m]) ** 2) * area)

    eg = energy(g)
    if eg <= 0:
        raise ValueError("||A(g)|| vanishes on the domain; the witness is degenerate")
    ef = energy(f)
    target = ef + eg
    measured = []
    for s in shifts:
        z = tf.snap(grid, PhasePoint(float(s), 0.0))
        measured.append(energy(f + tf.timefreq_shift(g, z)))
    last = measured[-1]
    rel = abs(last - target) / target
    passed = rel < tol and last - ef >= 0.9 * eg
    return CheckReport(
        "weak_usc_failure",
        passed,
        [
            ("shifts", list(map(float, shifts))),
            ("energy_of_sum", measured),
            ("energy_f", ef),
            ("energy_g", eg),
            ("relative_deviation_at_max_shift", rel),
        ],
        tol,
        "limit equals ||A(f)||^2 + ||A(g)||^2, so the weak limit f is not an upper bound",
    )


# -- time correlation: supremum not attained -----------------------------------

def interval_indicator(grid: TimeGrid, lam: float) -> Signal:
    """Normalized indicator of (-lam, lam) sampled at the grid points."""
    return Signal(grid, (np.abs(grid.t) < lam).astype(float)).normalized()


def check_nonattainment_timecorr(omega1=Interval(0.0, 1.0), p: float = 1.0,
                                 lams: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
                                 grid: Optional[TimeGrid] = None) -> CheckReport:
    lams = [float(l) for l in lams]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda values must be increasing")
    grid = grid or TimeGrid(1024, 1 / 32)
    tmask = rasterize_time(omega1, grid)
    bound = tmask.measure() ** (1 / p)
    vals = [fn.objective_timecorr(interval_indicator(grid, lam), tmask, p) for lam in lams]
    gaps = [bound - v for v in vals]
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    below = all(v < bound for v in vals)
    # least-squares fit gap ~ c / lam
    inv = 1 / np.array(lams)
    c_fit = float(np.dot(inv, gaps) / np.dot(inv, inv))
    measured = [
        ("lambda", lams),
        ("objective", vals),
        ("gap", gaps),
        ("gap_fit_c_over_lambda", c_fit),
        ("bound", bound),
    ]
    tol = 2 * grid.dx
    passed = increasing and below
    if isinstance(omega1, Interval) and omega1.a == 0 and p == 1 and all(l >= omega1.b / 2 for l in lams):
        # closed form: 1 - L/(4 lam) for Omega_1 = [0, L), L <= 2 lam
        L = omega1.b
        exact = [L - L * L / (4 * lam) for lam in lams]
        err = max(abs(v - e) for v, e in zip(vals, exact))
        measured.append(("closed_form", exact))
        measured.append(("max_abs_error", err))
        passed = passed and err <= tol
    return CheckReport(
        "nonattainment_timecorr",
        passed,
        measured,
        tol,
        "values increase with lambda and stay strictly below |Omega_1|^(1/p)",
    )


# -- L-infinity attainment dichotomy -------------------------------------------

def linf_grid() -> TimeGrid:
    return TimeGrid(2048, 0.2)


def check_linf_attainment(spec=Annulus(ORIGIN, 1.0, 2.0),
                          lams: Sequence[float] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
                          grid: Optional[TimeGrid] = None, sup_tol: float = 1e-2) -> CheckReport:
    dense = origin_density_positive(spec)
    if dense is None:
        raise Unsupported("attainment cannot be decided for a raster mask")
    grid = grid or linf_grid()
    mask = rasterize(spec, grid)
    lams = [float(l) for l in lams]
    vals = [fn.objective_linf(tf.gaussian(grid, lam), mask) for lam in lams]
    measured = [("origin_density_positive", dense), ("lambda", lams), ("objective_linf", vals)]
    if dense:
        v0 = fn.objective_linf(tf.gaussian(grid), mask)
        measured.append(("gaussian_value", v0))
        passed = abs(v0 - 1) <= 1e-12
        details = "origin has positive density: every signal attains the value 1"
    else:
        below = all(v < 1 for v in vals)
        increasing = all(b > a for a, b in zip(vals, vals[1:]))
        sup_gap = 1 - max(vals)
        measured.append(("sup_gap", sup_gap))
        passed = below and increasing and sup_gap <= sup_tol
        details = "origin is not a density point: values stay below 1 but approach it as lambda grows"
    return CheckReport("linf_attainment", passed, measured, sup_tol, details)


# -- symplectic covariance ------------------------------------------------------

def smooth_test_signal(grid: TimeGrid, seed: int = 0, atoms: int = 4) -> Signal:
    """Random combination of a few shifted, dilated Gaussians near the origin."""
    rng = np.random.default_rng(seed)
    out = np.zeros(grid.n, dtype=np.complex128)
    for _ in range(atoms):
        z = PhasePoint(rng.uniform(-1, 1), rng.uniform(-1, 1))
        lam = rng.uniform(0.7, 1.4)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        out += c * tf.gaussian(grid, lam, z).samples
    return Signal(grid, out).normalized()


def covariance_deviation(f: Signal, kind, radius: float = 3.0) -> float:
    """max |A(U f)(z)| - |A(f)(M z)| over lattice points with |x|, |omega| <= radius."""
    grid = f.grid
    u = tf.metaplectic_apply(f, kind)
    au = np.abs(tf.ambiguity(u).values)
    sel_t = np.flatnonzero(np.abs(grid.t) <= radius)
    sel_w = np.flatnonzero(np.abs(grid.omega) <= radius)
    X, W = np.meshgrid(grid.t[sel_t], grid.omega[sel_w], indexing="ij")
    M = kind.matrix()
    xs = M[0, 0] * X + M[0, 1] * W
    ws = M[1, 0] * X + M[1, 1] * W
    ref = np.abs(tf.ambiguity_at(f, xs.ravel(), ws.ravel())).reshape(X.shape)
    return float(np.max(np.abs(au[np.ix_(sel_t, sel_w)] - ref)))


def check_symplectic_covariance(f: Optional[Signal] = None, tol: float = 1e-5) -> CheckReport:
    grid = f.grid if f is not None else TimeGrid.square(256)
    f = f if f is not None else smooth_test_signal(grid)
    kinds = [("rotation_J", tf.Rotation()), ("dilation_2", tf.Dilation(2.0)), ("chirp_1", tf.Chirp(1.0))]
    measured = []
    worst = 0.0
    for label, kind in kinds:
        if isinstance(kind, tf.Rotation) and grid.dx != grid.domega:
            raise ValueError("the Fourier rotation needs a square grid (dx == domega)")
        dev = covariance_deviation(f, kind)
        measured.append((label, dev))
        worst = max(worst, dev)
    return CheckReport(
        "symplectic_covariance",
        worst < tol,
        measured,
        tol,
        "max |A(U f)(z) - A(f)(M z)| in magnitude on the central region |x|, |omega| <= 3",
    )


# -- Gabor frame bounds ----------------------------------------------------------

def frame_operator_bounds(g: Signal, lat: fn.GaborLattice) -> tuple[float, float]:
    """Exact optimal frame bounds on the grid: extreme eigenvalues of the frame operator."""
    grid = g.grid
    eye = np.eye(grid.n)
    cols = [fn.gabor_coefficients(Signal(grid, eye[j]), g, lat).ravel() for j in range(grid.n)]
    C = np.column_stack(cols)
    ev = np.linalg.eigvalsh(C.conj().T @ C / grid.dx)
    return float(max(ev[0], 0.0)), float(ev[-1])


def check_frame_bounds(g: Optional[Signal] = None, lat: Optional[fn.GaborLattice] = None,
                       trials: int = 100, seed: int = 0) -> CheckReport:
    grid = g.grid if g is not None else TimeGrid.square(256)
    g = g if g is not None else tf.gaussian(grid)
    lat = lat or fn.GaborLattice.default(grid)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trials):
        f = tf.random_signal(grid, rng)
        c = fn.gabor_coefficients(f, g, lat)
        ratios.append(float(np.sum(np.abs(c) ** 2)) / f.norm_sq())
    lo, hi = min(ratios), max(ratios)
    A, B = frame_operator_bounds(g, lat)
    measured = [
        ("a", lat.a),
        ("b", lat.b),
        ("density", lat.density),
        ("empirical_lower", lo),
        ("empirical_upper", hi),
        ("frame_bound_A", A),
        ("frame_bound_B", B),
        ("bound_ratio", B / A if A > 0 else float("inf")),
    ]
    if lat.density >= 1:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            fn.frame_warning(lat)
        return CheckReport("frame_bounds", True, measured, 0.0,
                           "report only: lattice density >= 1, no frame expected")
    # random probes must land inside the exact bounds
    consistent = A * (1 - 1e-9) <= lo and hi <= B * (1 + 1e-9)
    passed = A > 0 and np.isfinite(B) and consistent
    return CheckReport("frame_bounds", passed, measured, 0.0,
                       "0 < A <= B < inf from the frame operator spectrum; random probes inside [A, B]")


SUITES: dict[str, Callable[[int], CheckReport]] = {
    "radar_correlation": lambda seed: check_radar_correlation(seed=seed),
    "decoupling": lambda seed: check_decoupling(),
    "weak_usc_failure": lambda seed: check_weak_usc_failure(),
    "nonattainment_timecorr": lambda seed: check_nonattainment_timecorr(),
    "linf_attainment": lambda seed: check_linf_attainment(),
    "symplectic_covariance": lambda seed: check_symplectic_covariance(
        smooth_test_signal(TimeGrid.square(256), seed)),
    "frame_bounds": lambda seed: check_frame_bounds(seed=seed),
}


def run_suites(names: Sequence[str], seed: int = 0) -> list[CheckReport]:
    """Run the named checks in declaration order."""
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    wanted = [n for n in SUITES if n in set(names)]
    workers = min(_threads(), len(wanted))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda n: SUITES[n](seed), wanted))
    return [SUITES[n](seed) for n in wanted]


def summary_table(reports: Sequence[CheckReport]) -> str:
    width = max(len(r.name) for r in reports)
    lines = [f"{'check'.ljust(width)}  result"]
    for r in reports:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
