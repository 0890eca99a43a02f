"""Physical interpretation: dimensional maps, alpha/beta energy ratios, iso-curves.

Conventions (rescaled -> physical), with eps = t / (8 sqrt(3) pi^2 R sqrt(1 - nu^2)):

    radial displacement  W   = 4 pi^2 R eps w
    Airy function        Phi = 16 pi^4 R^2 eps^2 phi
    coordinates          X   = 2 pi R sqrt(eps) x
    axial load           P   = 8 pi^3 E R t eps lambda = pi E t^2 lambda / sqrt(3 (1 - nu^2))
    energy               E_d = 64 pi^6 E t R^2 eps^3 E(w)
    shortening           S_d = 8 pi^3 R eps^2 S(w)

so that E_d - P S_d = 64 pi^6 E t R^2 eps^3 F_lambda(w). The classical load
2 pi E t^2 / sqrt(3 (1 - nu^2)) corresponds to lambda = 2.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import airy
from .continuation import VFit, fit_v_curve
from .grid import DomainSpec, ScalarField, integrate_arr, laplacian_arr, shortening_arr


class CalibrationError(ValueError):
    pass


class RangeExhausted(CalibrationError):
    pass


class ParseError(CalibrationError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class EmptyData(CalibrationError):
    pass


class Target(str, enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"


class Plane(str, enum.Enum):
    LT = "Lt"
    RT = "Rt"


_PLANE_FOR = {Target.ALPHA: Plane.LT, Target.BETA: Plane.RT}


@dataclass(frozen=True)
class ShellGeometry:
    radius_R: float
    thickness_t: float
    length_L: float
    youngs_E: float
    poisson_nu: float

    def __post_init__(self):
        for name in ("radius_R", "thickness_t", "length_L", "youngs_E"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.poisson_nu < 0.5:
            raise ValueError("poisson_nu must lie in (0, 1/2)")
        if not self.thickness_t < self.radius_R:
            raise ValueError("thickness must be smaller than the radius")

    @property
    def _k(self) -> float:
        return math.sqrt(1.0 - self.poisson_nu**2)

    @property
    def eps(self) -> float:
        return self.thickness_t / (8.0 * math.sqrt(3.0) * math.pi**2 * self.radius_R * self._k)

    @property
    def eps_from_square(self) -> float:
        """eps from eps^2 = t^2 / (192 pi^4 R^2 (1 - nu^2)); must agree with `eps`."""
        r, t, nu = self.radius_R, self.thickness_t, self.poisson_nu
        return math.sqrt(t**2 / (192.0 * math.pi**4 * r**2 * (1.0 - nu**2)))

    def load(self, lam: float) -> float:
        """Axial force P for rescaled load lam."""
        return 8.0 * math.pi**3 * self.youngs_E * self.radius_R * self.thickness_t * self.eps * lam

    @property
    def classical_load(self) -> float:
        return 2.0 * math.pi * self.youngs_E * self.thickness_t**2 / math.sqrt(3.0 * (1.0 - self.poisson_nu**2))

    @property
    def energy_scale(self) -> float:
        """Factor between rescaled and dimensional energies."""
        return 64.0 * math.pi**6 * self.youngs_E * self.thickness_t * self.radius_R**2 * self.eps**3


def load_ratio(lam):
    """P / P_classical. With P = pi E t^2 lam / sqrt(3(1-nu^2)) this is lam / 2."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be non-negative")
    out = lam / 2.0
    return float(out) if out.ndim == 0 else out


def _coef(nu: float) -> float:
    return math.sqrt(3.0 * (1.0 - nu**2))


def alpha_of(geom: ShellGeometry, lam: float, v: float) -> float:
    """Mountain-pass energy over the compression energy of the full length L."""
    if not (v > 0 and lam > 0):
        raise ValueError("need V > 0 and lambda > 0")
    return (geom.thickness_t / geom.length_L) * v / (2.0 * math.pi * _coef(geom.poisson_nu) * lam**2)


def beta_of(geom: ShellGeometry, lam: float, v: float) -> float:
    """Mountain-pass energy over the compression energy of a section of length 2 pi R."""
    if not (v > 0 and lam > 0):
        raise ValueError("need V > 0 and lambda > 0")
    return (geom.thickness_t / geom.radius_R) * v / (4.0 * math.pi**2 * _coef(geom.poisson_nu) * lam**2)


def geom_ratio_for(target: Target | str, value: float, nu: float, lam: float, v: float) -> float:
    """L/t (alpha) or R/t (beta) at which the ratio equals `value`."""
    target = Target(target)
    if not value > 0:
        raise ValueError("target value must be positive")
    if target is Target.ALPHA:
        return v / (2.0 * math.pi * _coef(nu) * lam**2 * value)
    return v / (4.0 * math.pi**2 * _coef(nu) * lam**2 * value)


# --- V(lambda) curve ---------------------------------------------------------


@dataclass
class VCurve:
    """Computed (lambda, V) samples plus a monotone power fit for extrapolation."""
    lams: np.ndarray
    values: np.ndarray
    fit: VFit | None = None
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        lams = np.asarray(self.lams, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        order = np.argsort(lams)
        self.lams, self.values = lams[order], vals[order]
        if self.lams.size == 0:
            raise EmptyData("V curve has no samples")
        if np.any(self.values <= 0):
            raise ValueError("V must be positive")
        if np.any(np.diff(self.values) >= 0):
            raise ValueError("V must be strictly decreasing in lambda")
        if not self.provenance:
            self.provenance = ["computed"] * self.lams.size

    @classmethod
    def with_fit(cls, lams, values) -> "VCurve":
        return cls(lams, values, fit_v_curve(lams, values))

    def __call__(self, lam: float) -> tuple[float, str]:
        """V(lam) and its provenance ('computed' inside the samples, else 'fitted')."""
        lo, hi = self.lams[0], self.lams[-1]
        if lo <= lam <= hi:
            # log-linear interpolation keeps positivity and monotonicity
            return float(np.exp(np.interp(lam, self.lams, np.log(self.values)))), "computed"
        if self.fit is None or not 0 < lam < 2:
            raise RangeExhausted(f"lambda={lam:g} outside computed range [{lo:g}, {hi:g}] and no fit")
        return float(self.fit(lam)), "fitted"


@dataclass(frozen=True)
class CurvePoint:
    lam: float
    load_ratio: float
    geom_ratio: float
    target: str
    value: float
    provenance: str = "computed"


def iso_curve(vcurve: VCurve, nu: float, target: Target | str, value: float,
              plane: Plane | str, lams=None) -> list[CurvePoint]:
    """Constant-alpha (L/t plane) or constant-beta (R/t plane) curve, sorted by geom_ratio."""
    target, plane = Target(target), Plane(plane)
    if _PLANE_FOR[target] is not plane:
        raise CalibrationError(f"target {target.value} belongs to plane {_PLANE_FOR[target].value}")
    lams = vcurve.lams if lams is None else np.asarray(lams, dtype=float)
    pts = []
    for lam in lams:
        v, prov = vcurve(float(lam))
        pts.append(CurvePoint(float(lam), load_ratio(float(lam)),
                              geom_ratio_for(target, value, nu, float(lam), v), target.value, value, prov))
    if not pts:
        raise RangeExhausted("no lambda samples for the curve")
    return sorted(pts, key=lambda p: p.geom_ratio)


def curve_value_at(curve: list[CurvePoint], geom_ratio: float) -> float | None:
    """Load ratio on the curve at geom_ratio (log-linear in geom_ratio), None outside."""
    g = np.array([p.geom_ratio for p in curve])
    y = np.array([p.load_ratio for p in curve])
    if not g[0] <= geom_ratio <= g[-1]:
        return None
    return float(np.interp(math.log(geom_ratio), np.log(g), y))


# --- experimental data -------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPoint:
    geom_ratio: float
    load_ratio: float
    label: str = "unknown"


@dataclass
class ExperimentSet:
    plane: Plane
    points: list[ExperimentPoint]


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", line) from None
    if not math.isfinite(val):
        raise ParseError(f"{what} must be finite", line)
    return val


def ingest_experiments(path: str | Path, plane: Plane | str) -> ExperimentSet:
    """Read geom_ratio,load_ratio[,label] rows. A header row is detected and skipped."""
    plane = Plane(plane)
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "geom_ratio":
                continue
            if len(row) < 2 or len(row) > 3:
                raise ParseError(f"expected 2 or 3 columns, got {len(row)}", lineno)
            g = _parse_float(row[0].strip(), "geom_ratio", lineno)
            p = _parse_float(row[1].strip(), "load_ratio", lineno)
            if g <= 0:
                raise ParseError("geom_ratio must be positive", lineno)
            label = row[2].strip() if len(row) == 3 and row[2].strip() else "unknown"
            points.append(ExperimentPoint(g, p, label))
    if not points:
        raise EmptyData(f"{path}: no data rows")
    return ExperimentSet(plane, points)


@dataclass
class OverlayReport:
    rows: list[dict]
    n_compared: int
    n_below: int

    @property
    def fraction_below(self) -> float:
        return self.n_below / self.n_compared if self.n_compared else float("nan")


def overlay(data: ExperimentSet, curve: list[CurvePoint]) -> OverlayReport:
    """Compare each data point with the curve at its geom_ratio.

    Points outside the curve's geom_ratio span are listed but not counted.
    """
    rows, n, below = [], 0, 0
    for p in data.points:
        c = curve_value_at(curve, p.geom_ratio)
        is_below = None if c is None else p.load_ratio < c
        if c is not None:
            n += 1
            below += int(is_below)
        rows.append({"geom_ratio": p.geom_ratio, "load_ratio": p.load_ratio, "label": p.label,
                     "curve_load_ratio": c, "below_curve": is_below})
    return OverlayReport(rows, n, below)


# --- dimensional maps --------------------------------------------------------


@dataclass
class PhysicalState:
    """A rescaled solution expressed in physical units."""
    displacement: np.ndarray  # W on the grid nodes
    half_length_x: float
    half_length_y: float
    load: float
    energy: float  # dimensional F = E_d - P S_d at the state

    @property
    def shape(self):
        return self.displacement.shape


def to_physical(geom: ShellGeometry, w: ScalarField, lam: float, level: float) -> PhysicalState:
    e = geom.eps
    r = geom.radius_R
    scale_x = 2.0 * math.pi * r * math.sqrt(e)
    return PhysicalState(
        displacement=4.0 * math.pi**2 * r * e * w.values,
        half_length_x=scale_x * w.spec.a,
        half_length_y=scale_x * w.spec.b,
        load=geom.load(lam),
        energy=geom.energy_scale * level,
    )


def from_physical(geom: ShellGeometry, state: PhysicalState) -> tuple[ScalarField, float, float]:
    e = geom.eps
    r = geom.radius_R
    scale_x = 2.0 * math.pi * r * math.sqrt(e)
    nx, ny = state.shape[0] - 1, state.shape[1]
    spec = DomainSpec(state.half_length_x / scale_x, state.half_length_y / scale_x, nx, ny)
    w = ScalarField(spec, state.displacement / (4.0 * math.pi**2 * r * e))
    lam = state.load / (8.0 * math.pi**3 * geom.youngs_E * r * geom.thickness_t * e)
    return w, lam, state.energy / geom.energy_scale


def dimensional_energy(geom: ShellGeometry, w: ScalarField) -> tuple[float, float]:
    """(E_d, S_d) evaluated directly in the barred (circumference = 1) variables.

    Uses E_d = pi^2 t^3 E / (6(1-nu^2)) int lap(wb)^2 + 32 pi^6 t E R^2 int lap(phib)^2
    and S_d = 4 pi^3 R int wb_x^2, with wb = eps w, phib = eps^2 phi on the
    grid stretched by sqrt(eps).
    """
    e = geom.eps
    t, r, ym, nu = geom.thickness_t, geom.radius_R, geom.youngs_E, geom.poisson_nu
    s = w.spec
    sq = math.sqrt(e)
    bar = DomainSpec(s.a * sq, s.b * sq, s.nx, s.ny)
    wb = e * w.values
    phib = e**2 * airy.phi_arr(w.values, s)
    lw = laplacian_arr(wb, bar.hx, bar.hy)
    lp = laplacian_arr(phib, bar.hx, bar.hy)
    e_d = (math.pi**2 * t**3 * ym / (6.0 * (1.0 - nu**2))) * integrate_arr(lw**2, bar) \
        + 32.0 * math.pi**6 * t * ym * r**2 * integrate_arr(lp**2, bar)
    s_d = 4.0 * math.pi**3 * r * 2.0 * shortening_arr(wb, bar)
    return e_d, s_d


def write_svg(path: str | Path, curves: dict[str, list[CurvePoint]], data: ExperimentSet | None = None) -> None:
    """Static line plot of iso-curves (and data points) in the geom_ratio/load_ratio plane."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in curves.items():
        ax.plot([p.geom_ratio for p in pts], [p.load_ratio for p in pts], label=name)
    if data is not None:
        ax.scatter([p.geom_ratio for p in data.points], [p.load_ratio for p in data.points],
                   s=8, c="k", label="data")
        xlabel = "L/t" if data.plane is Plane.LT else "R/t"
    else:
        first = next(iter(curves.values()), [])
        xlabel = "L/t" if first and first[0].target == Target.ALPHA.value else "R/t"
    ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("P / P_classical")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
