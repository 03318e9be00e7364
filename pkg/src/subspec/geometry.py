"""Case descriptions: warp profiles, fibers, weighted intervals, model values.

Everything here is immutable and pure; numerical work happens in
:mod:`subspec.discretize` and :mod:`subspec.spectral`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as _gamma

from .errors import (
    InvalidModelError,
    InvalidWarpError,
    SingularPotentialError,
    SUndefinedError,
    UnsupportedCaseError,
)

WARP_FAMILIES = ("constant", "exponential", "gaussian", "cosh", "sinh", "tabulated")
BOUNDARY_CONDITIONS = ("dirichlet", "neumann", "pole-regular")


# ---------------------------------------------------------------------------
# Warp / density profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WarpFunction:
    """One-dimensional positive profile ``c * f(a r) ** power``.

    Families: ``constant``, ``exponential`` (f = exp), ``gaussian``
    (f = exp(a r^2)), ``cosh``, ``sinh`` (positive only for r > 0), and
    ``tabulated`` (cubic spline through positive samples).  The same class
    doubles as the density of a weighted interval; ``power`` exists for
    densities like sinh^(m-1).

    Analytic first and second derivatives are exposed so that downstream
    potentials are exact, not differenced.
    """

    family: str
    a: float = 1.0
    c: float = 1.0
    power: int = 1
    nodes: tuple[float, ...] | None = None
    samples: tuple[float, ...] | None = None
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in WARP_FAMILIES:
            raise InvalidWarpError(f"unknown warp family {self.family!r}")
        if self.c <= 0:
            raise InvalidWarpError(f"scale c must be positive, got {self.c}")
        if self.power < 1:
            raise InvalidWarpError(f"power must be a positive integer, got {self.power}")
        if self.family == "tabulated":
            if not self.nodes or not self.samples or len(self.nodes) != len(self.samples):
                raise InvalidWarpError("tabulated warp needs matching nodes and samples")
            if len(self.nodes) < 4:
                raise InvalidWarpError("tabulated warp needs at least 4 samples")
            s = np.asarray(self.samples, dtype=float)
            if np.any(s <= 0):
                raise InvalidWarpError("tabulated warp samples must all be positive")
            if np.any(np.diff(np.asarray(self.nodes)) <= 0):
                raise InvalidWarpError("tabulated warp nodes must be strictly increasing")
            object.__setattr__(
                self, "_spline", CubicSpline(np.asarray(self.nodes), s, bc_type="natural")
            )

    # -- raw family factor f(a r) and its derivatives ------------------------

    def _f(self, r):
        a = self.a
        if self.family == "constant":
            return np.ones_like(r)
        if self.family == "exponential":
            return np.exp(a * r)
        if self.family == "gaussian":
            return np.exp(a * r * r)
        if self.family == "cosh":
            return np.cosh(a * r)
        if self.family == "sinh":
            return np.sinh(a * r)
        raise AssertionError

    def _df(self, r):
        a = self.a
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "exponential":
            return a * np.exp(a * r)
        if self.family == "gaussian":
            return 2.0 * a * r * np.exp(a * r * r)
        if self.family == "cosh":
            return a * np.sinh(a * r)
        if self.family == "sinh":
            return a * np.cosh(a * r)
        raise AssertionError

    def _d2f(self, r):
        a = self.a
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "exponential":
            return a * a * np.exp(a * r)
        if self.family == "gaussian":
            return (2.0 * a + 4.0 * a * a * r * r) * np.exp(a * r * r)
        if self.family == "cosh":
            return a * a * np.cosh(a * r)
        if self.family == "sinh":
            return a * a * np.sinh(a * r)
        raise AssertionError

    # -- public evaluation ----------------------------------------------------

    def value(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "tabulated":
            v = self._spline(r)
        else:
            v = self._f(r)
        if self.power != 1:
            v = v**self.power
        return self.c * v

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "tabulated":
            f, df = self._spline(r), self._spline(r, 1)
        else:
            f, df = self._f(r), self._df(r)
        p = self.power
        if p == 1:
            return self.c * df
        return self.c * p * f ** (p - 1) * df

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "tabulated":
            f, df, d2f = self._spline(r), self._spline(r, 1), self._spline(r, 2)
        else:
            f, df, d2f = self._f(r), self._df(r), self._d2f(r)
        p = self.power
        if p == 1:
            return self.c * d2f
        return self.c * p * f ** (p - 2) * ((p - 1) * df * df + f * d2f)

    def log_d1(self, r):
        """d/dr log(value) = value'/value, computed without value ratios.

        Safe far into the tails of decaying families, where the values
        themselves underflow.
        """
        r = np.asarray(r, dtype=float)
        p, a = self.power, self.a
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "exponential":
            return np.full_like(r, p * a)
        if self.family == "gaussian":
            return 2.0 * p * a * r
        if self.family == "cosh":
            return p * a * np.tanh(a * r)
        if self.family == "sinh":
            return p * a / np.tanh(a * r)
        return self._spline(r, 1) / self._spline(r)

    def ratio_d2(self, r):
        """value''/value without forming the possibly-underflowing values."""
        r = np.asarray(r, dtype=float)
        p, a = self.power, self.a
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "tabulated":
            return self._spline(r, 2) / self._spline(r)
        if self.family == "exponential":
            fpf = np.full_like(r, a)
            f2f = np.full_like(r, a * a)
        elif self.family == "gaussian":
            fpf = 2.0 * a * r
            f2f = 2.0 * a + 4.0 * a * a * r * r
        elif self.family == "cosh":
            fpf = a * np.tanh(a * r)
            f2f = np.full_like(r, a * a)
        else:  # sinh
            fpf = a / np.tanh(a * r)
            f2f = np.full_like(r, a * a)
        return p * (p - 1) * fpf * fpf + p * f2f

    @property
    def is_constant(self) -> bool:
        return self.family == "constant" or (
            self.family != "tabulated" and self.a == 0.0
        )

    def constant_value(self) -> float:
        if not self.is_constant:
            raise InvalidWarpError("profile is not constant")
        return float(self.value(0.0))

    def vanishing_order(self, r0: float) -> int:
        """Order of the zero of the profile at r0 (0 if positive there)."""
        if self.family == "sinh" and abs(r0) < 1e-14:
            return self.power
        return 0

    def check_positive(self, lo: float, hi: float) -> None:
        """Raise unless the profile is strictly positive on the open (lo, hi).

        Analytic families are positive by construction (sinh only on one
        side of the origin); values that merely underflow in the far tails
        of decaying families are not an error.
        """
        if self.family == "sinh":
            wrong_side = lo < 0 if self.a > 0 else hi > 0
            if wrong_side:
                raise InvalidWarpError("sinh profile is positive only on one side of 0")
            return
        if self.family != "tabulated":
            return
        probe = np.linspace(lo, hi, 257)[1:-1]
        if np.any(self.value(probe) <= 0):
            raise InvalidWarpError(
                f"profile {self.family} not positive on ({lo}, {hi})"
            )

    def sup_abs_log_d1(self, lo: float, hi: float,
                       unbounded_lo: bool = False, unbounded_hi: bool = False) -> float:
        """sup |value'/value| over the domain; inf when genuinely unbounded.

        Truncation flags widen the domain to -inf / +inf for the supremum,
        which is where gaussian profiles report an unbounded gradient.
        """
        p, a = self.power, self.a
        if self.family == "constant" or a == 0.0:
            return 0.0
        if self.family == "exponential":
            return abs(p * a)
        if self.family == "gaussian":
            if unbounded_lo or unbounded_hi:
                return math.inf
            return abs(2.0 * p * a) * max(abs(lo), abs(hi))
        if self.family == "cosh":
            # |tanh| increasing in |r|; bounded by 1 on the full line
            if unbounded_lo or unbounded_hi:
                return abs(p * a)
            return abs(p * a) * max(abs(math.tanh(a * lo)), abs(math.tanh(a * hi)))
        if self.family == "sinh":
            # |coth| decreasing in |r|; diverges toward the pole
            edge = min(abs(lo), abs(hi))
            if edge == 0.0:
                return math.inf
            sup = abs(p * a) * abs(1.0 / math.tanh(a * edge))
            return sup
        # tabulated: dense sampling
        grid = np.linspace(lo, hi, 4097)
        return float(np.max(np.abs(self.log_d1(grid))))


def constant_warp(c: float = 1.0) -> WarpFunction:
    return WarpFunction("constant", a=0.0, c=c)


# ---------------------------------------------------------------------------
# Fibers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiberSpec:
    """Fiber of the submersion with explicit spectral data.

    Closed kinds (circle, sphere, torus, explicit) carry a volume and an
    eigenvalue generator with nu_0 = 0.  Noncompact fibers carry only the
    bottom of their spectrum and a dimension.
    """

    kind: str
    dim: int
    radius: float | None = None
    lengths: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None
    declared_volume: float | None = None
    bottom: float = 0.0

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def circle(radius: float = 1.0) -> "FiberSpec":
        if radius <= 0:
            raise UnsupportedCaseError("circle radius must be positive")
        return FiberSpec(kind="circle", dim=1, radius=radius)

    @staticmethod
    def sphere(dim: int) -> "FiberSpec":
        if dim < 1:
            raise UnsupportedCaseError("sphere dimension must be >= 1")
        return FiberSpec(kind="sphere", dim=dim)

    @staticmethod
    def torus(lengths: Sequence[float]) -> "FiberSpec":
        lengths = tuple(float(x) for x in lengths)
        if not lengths or any(x <= 0 for x in lengths):
            raise UnsupportedCaseError("torus lengths must be positive")
        return FiberSpec(kind="torus", dim=len(lengths), lengths=lengths)

    @staticmethod
    def explicit(values: Sequence[float], dim: int, volume: float) -> "FiberSpec":
        values = tuple(float(x) for x in values)
        if not values or values[0] != 0.0:
            raise UnsupportedCaseError("closed fiber spectrum must start at 0")
        if any(b < a for a, b in zip(values, values[1:])):
            raise UnsupportedCaseError("explicit eigenvalues must be nondecreasing")
        if volume <= 0:
            raise UnsupportedCaseError("fiber volume must be positive")
        return FiberSpec(kind="explicit", dim=dim, values=values, declared_volume=volume)

    @staticmethod
    def noncompact(bottom: float, dim: int) -> "FiberSpec":
        if bottom < 0:
            raise UnsupportedCaseError("bottom of spectrum cannot be negative")
        return FiberSpec(kind="noncompact", dim=dim, bottom=bottom)

    # -- properties -----------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self.kind != "noncompact"

    @property
    def lambda0(self) -> float:
        """Bottom of the fiber spectrum (0 for closed connected kinds)."""
        return 0.0 if self.closed else self.bottom

    @property
    def volume(self) -> float:
        if self.kind == "circle":
            return 2.0 * math.pi * self.radius
        if self.kind == "sphere":
            k = self.dim
            return 2.0 * math.pi ** ((k + 1) / 2.0) / _gamma((k + 1) / 2.0)
        if self.kind == "torus":
            return float(np.prod(self.lengths))
        if self.kind == "explicit":
            return self.declared_volume
        raise SUndefinedError("noncompact fiber has no finite volume")

    # -- spectrum -------------------------------------------------------------

    def distinct_levels(self, nu_max: float) -> list[tuple[float, int]]:
        """Distinct fiber eigenvalues <= nu_max with multiplicities, ascending."""
        if not self.closed:
            raise SUndefinedError("noncompact fiber has no eigenvalue generator")
        out: list[tuple[float, int]] = []
        if self.kind == "circle":
            j = 0
            while True:
                nu = (j / self.radius) ** 2
                if nu > nu_max:
                    break
                out.append((nu, 1 if j == 0 else 2))
                j += 1
        elif self.kind == "sphere":
            k = self.dim
            l = 0
            while True:
                nu = l * (l + k - 1)
                if nu > nu_max:
                    break
                out.append((float(nu), _sphere_multiplicity(l, k)))
                l += 1
        elif self.kind == "torus":
            out = _torus_levels(self.lengths, nu_max)
        else:  # explicit
            vals = [v for v in self.values if v <= nu_max]
            uniq: dict[float, int] = {}
            for v in vals:
                uniq[v] = uniq.get(v, 0) + 1
            out = sorted(uniq.items())
        return out

    def eigenvalues(self, count: int) -> np.ndarray:
        """First ``count`` fiber eigenvalues with multiplicity, nondecreasing."""
        if not self.closed:
            raise SUndefinedError("noncompact fiber has no eigenvalue generator")
        nu_max = 1.0
        while True:
            if self.kind == "explicit" and nu_max > max(self.values):
                levels = self.distinct_levels(max(self.values))
            else:
                levels = self.distinct_levels(nu_max)
            flat = [v for v, m in levels for _ in range(m)]
            if len(flat) >= count or self.kind == "explicit":
                if len(flat) < count:
                    raise SUndefinedError(
                        f"explicit fiber lists only {len(flat)} eigenvalues, "
                        f"{count} requested"
                    )
                return np.asarray(flat[:count])
            nu_max *= 4.0


def _sphere_multiplicity(l: int, k: int) -> int:
    """Dimension of degree-l spherical harmonics on S^k."""
    if l == 0:
        return 1
    return int(round(math.comb(l + k, k) - math.comb(l + k - 2, k)))


def _torus_levels(lengths: Sequence[float], nu_max: float) -> list[tuple[float, int]]:
    bounds = [int(math.floor(math.sqrt(nu_max) * L / (2 * math.pi))) for L in lengths]
    acc: dict[float, int] = {}
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    nu = sum((2 * math.pi * g / L) ** 2 for g, L in zip(grids, lengths))
    for v in np.round(nu.ravel(), 12):
        if v <= nu_max + 1e-12:
            acc[float(v)] = acc.get(float(v), 0) + 1
    return sorted(acc.items())


# ---------------------------------------------------------------------------
# Base intervals and cases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedInterval:
    """Interval [lo, hi] with a positive density and endpoint conditions.

    The density plays the role of the Riemannian volume factor of the base
    (or of a radial surrogate of a higher-dimensional base).  A truncation
    flag on an endpoint marks that the interval stands in for an
    unbounded direction; reports carry a sensitivity estimate for it.

    A vanishing density at an endpoint must be paired with the
    ``pole-regular`` condition there, and conversely.
    """

    lo: float
    hi: float
    weight: WarpFunction = field(default_factory=constant_warp)
    bc_lo: str = "dirichlet"
    bc_hi: str = "dirichlet"
    truncated_lo: bool = False
    truncated_hi: bool = False
    lambda0_reference: float | None = None

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise InvalidWarpError(f"degenerate range [{self.lo}, {self.hi}]")
        for bc in (self.bc_lo, self.bc_hi):
            if bc not in BOUNDARY_CONDITIONS:
                raise InvalidWarpError(f"unknown boundary condition {bc!r}")
        self.weight.check_positive(self.lo, self.hi)
        for r0, bc, name in ((self.lo, self.bc_lo, "lo"), (self.hi, self.bc_hi, "hi")):
            vanishes = self.weight.vanishing_order(r0) > 0 or float(self.weight.value(r0)) == 0.0
            if vanishes != (bc == "pole-regular"):
                raise InvalidWarpError(
                    f"endpoint {name}: pole-regular condition must be used exactly "
                    f"when the density vanishes there (got {bc!r})"
                )

    @property
    def has_pole(self) -> bool:
        return "pole-regular" in (self.bc_lo, self.bc_hi)

    @property
    def truncated(self) -> bool:
        return self.truncated_lo or self.truncated_hi

    def with_range(self, lo: float, hi: float) -> "WeightedInterval":
        return replace(self, lo=lo, hi=hi)


@dataclass(frozen=True)
class Tolerances:
    """Solver and verdict tolerances; defaults documented in the CLI schema."""

    solver: float = 1e-10
    identity: float = 1e-12
    budget_safety: float = 2.0
    slope_threshold: float = 0.5
    slack_coeff: float = 0.5
    probe_rel: float = 1e-6


@dataclass(frozen=True)
class ProbeSettings:
    """Exhaustion-probe policy; radii default to a fraction of the truncation.

    Truncation overrides widen the probed region beyond the case range so
    the complements see the manifold rather than the cut-off box;
    ``base_truncation`` covers the base-only targets, ``total_truncation``
    the total space (only safe when the warp stays representable there).
    """

    radii: tuple[float, ...] | None = None
    base_truncation: float | None = None
    total_truncation: float | None = None
    min_nodes: int = 8


@dataclass(frozen=True)
class SubmersionCase:
    """Full description of one submersion over a 1-D (or radial) base."""

    name: str
    kind: str  # "product" | "warped"
    base: WeightedInterval
    warp: WarpFunction
    fiber: FiberSpec
    resolution: int = 800
    mode_cutoff: int | None = None  # None: automatic from the window rule
    num_eigenvalues: int = 6
    tolerances: Tolerances = field(default_factory=Tolerances)
    probes: ProbeSettings = field(default_factory=ProbeSettings)
    mean_curvature_override: float | None = None
    tensor_range: tuple[float, float] | None = None
    tensor_resolution: int | None = None
    tensor_ntheta: int = 64

    def __post_init__(self):
        if self.kind not in ("product", "warped"):
            raise UnsupportedCaseError(f"unknown case kind {self.kind!r}")
        if self.kind == "product" and not self.warp.is_constant:
            raise UnsupportedCaseError("product case requires a constant warp")
        if self.resolution < 8:
            raise UnsupportedCaseError("resolution must be at least 8")
        self.warp.check_positive(self.base.lo, self.base.hi)

    def with_resolution(self, n: int) -> "SubmersionCase":
        return replace(self, resolution=n)

    def with_truncation(self, hi: float, lo: float | None = None) -> "SubmersionCase":
        """Move truncated endpoints; fixed (non-truncated) endpoints stay put."""
        base = self.base
        new_lo = base.lo
        if base.truncated_lo:
            new_lo = lo if lo is not None else (base.lo - (hi - base.hi) if base.truncated_hi else base.lo)
        new_hi = hi if base.truncated_hi else base.hi
        return replace(self, base=base.with_range(new_lo, new_hi))

    def with_warp_parameter(self, a: float) -> "SubmersionCase":
        return replace(self, warp=replace(self.warp, a=a))


# ---------------------------------------------------------------------------
# Geometry operations
# ---------------------------------------------------------------------------

def mean_curvature_bound(case: SubmersionCase) -> float:
    """Fiber mean-curvature bound C = k sup |psi'/psi| over the base domain.

    Returns ``inf`` when the supremum is genuinely unbounded (gaussian warp
    over an interval that truncates an infinite direction); downstream
    checkers treat that as a failed hypothesis rather than an error.
    """
    base, warp = case.base, case.warp
    sup = warp.sup_abs_log_d1(
        base.lo, base.hi,
        unbounded_lo=base.truncated_lo, unbounded_hi=base.truncated_hi,
    )
    return case.fiber.dim * sup


def declared_mean_curvature(case: SubmersionCase) -> float:
    """Mean-curvature bound used by checkers; honors the config override."""
    if case.mean_curvature_override is not None:
        return case.mean_curvature_override
    return mean_curvature_bound(case)


@dataclass(frozen=True)
class VolumePotential:
    """Potential of the volume-renormalized operator on the base.

    ``primary`` evaluates -(Delta phi)/phi with phi = psi^(k/2) and Delta the
    weighted 1-D Laplacian of the base; ``divergence_form`` evaluates the
    algebraically equal expression |X|^2/4 - div(X)/2 built from the
    log-gradient field X = -k psi'/psi.  Both use analytic derivatives.
    """

    case: SubmersionCase

    def _parts(self, r):
        warp, w = self.case.warp, self.case.base.weight
        k = self.case.fiber.dim
        lp = warp.log_d1(r)      # psi'/psi
        lq = warp.ratio_d2(r)    # psi''/psi
        wl = w.log_d1(r)         # w'/w
        return k, lp, lq, wl

    def primary(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            k, lp, lq, wl = self._parts(r)
            half = 0.5 * k
            return half * (half - 1.0) * lp * lp + half * lq + wl * half * lp

    def divergence_form(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            k, lp, lq, wl = self._parts(r)
            x = -k * lp
            div_x = -k * (lq - lp * lp) + wl * x
            return 0.25 * x * x - 0.5 * div_x

    def __call__(self, r):
        return self.primary(r)

    def value_at_pole(self, r0: float) -> float:
        """Limit of the potential at a pole endpoint (warp must be regular)."""
        warp, w = self.case.warp, self.case.base.weight
        k = self.case.fiber.dim
        p = w.vanishing_order(r0)
        half = 0.5 * k
        lq0 = float(warp.ratio_d2(np.asarray(r0)))
        # psi'(r0) = 0 here, so psi'/psi ~ lq0 * (r - r0) and w'/w ~ p/(r - r0)
        return half * lq0 * (1.0 + p)

    @property
    def is_constant(self) -> bool:
        w, warp = self.case.base.weight, self.case.warp
        if warp.is_constant:
            return True
        # exponential warp over a constant density gives a constant potential
        return warp.family == "exponential" and w.is_constant

    def constant_value(self) -> float:
        if not self.is_constant:
            raise SUndefinedError("potential is not constant")
        mid = 0.5 * (self.case.base.lo + self.case.base.hi)
        return float(self.primary(mid))


def schrodinger_potential(case: SubmersionCase) -> VolumePotential:
    """Analytic potential -(Delta sqrt(V))/sqrt(V) of the base operator.

    Raises for noncompact fibers (no volume function) and for pole endpoints
    where the warp gradient does not vanish (the potential diverges there).
    """
    if not case.fiber.closed:
        raise SUndefinedError(
            "volume potential needs closed fibers; fiber is noncompact"
        )
    pot = VolumePotential(case)
    base = case.base
    for r0, bc in ((base.lo, base.bc_lo), (base.hi, base.bc_hi)):
        if bc == "pole-regular" and abs(float(case.warp.d1(r0))) > 1e-12:
            raise SingularPotentialError(
                f"warp gradient {float(case.warp.d1(r0)):g} at pole r = {r0:g}; "
                "potential diverges"
            )
    return pot


@dataclass(frozen=True)
class FiberBottomProfile:
    """Sampled x -> lambda0(F_x) along the base, with its infimum."""

    positions: np.ndarray
    values: np.ndarray
    infimum: float

    @property
    def flat(self) -> bool:
        spread = float(np.max(self.values) - np.min(self.values))
        return spread <= 1e-12 * max(1.0, abs(self.infimum))


def fiber_lambda0_profile(case: SubmersionCase, positions=None) -> FiberBottomProfile:
    """Profile of the fiber bottom along the base.

    Closed connected fibers contribute identically zero; a noncompact fiber
    with bottom lambda0(F) scales like lambda0(F) / psi(x)^2 under the warp.
    """
    if positions is None:
        positions = np.linspace(case.base.lo, case.base.hi, 513)
    positions = np.asarray(positions, dtype=float)
    if case.fiber.closed:
        values = np.zeros_like(positions)
    else:
        psi = case.warp.value(positions)
        values = case.fiber.lambda0 / psi**2
    return FiberBottomProfile(positions, values, float(np.min(values)))


@dataclass(frozen=True)
class ModelBottom:
    value: float
    is_lower_bound: bool = False


def model_lambda0(model: str, m: int | None = None, d: int | None = None,
                  mu_gamma: float | None = None, a: float | None = None) -> ModelBottom:
    """Closed-form bottoms of spectra for the model spaces.

    ``hyperbolic(m)``: (m-1)^2/4.  ``kh(m, d)``: (m+d-2)^2/4 for the rank-one
    symmetric spaces over R, C, H, O (d = 8 forces m = 2).  ``quotient(m, d,
    mu_gamma)``: the growth-rate branch formula for regular quotients.
    ``mckean(m, a)``: the curvature lower bound (m-1)^2 a^2 / 4, flagged as a
    lower bound rather than an exact value.
    """
    if model == "hyperbolic":
        if m is None or m < 2:
            raise InvalidModelError("hyperbolic model needs dimension m >= 2")
        return ModelBottom((m - 1) ** 2 / 4.0)
    if model == "kh":
        if m is None or d is None:
            raise InvalidModelError("kh model needs m and d")
        if d not in (1, 2, 4, 8):
            raise InvalidModelError(f"d must be 1, 2, 4 or 8, got {d}")
        if d == 8 and m != 2:
            raise InvalidModelError("octonionic case requires m = 2")
        if m < 2:
            raise InvalidModelError("kh model needs m >= 2")
        return ModelBottom((m + d - 2) ** 2 / 4.0)
    if model == "quotient":
        if m is None or d is None or mu_gamma is None:
            raise InvalidModelError("quotient model needs m, d and mu_gamma")
        mu = model_lambda0("kh", m=m, d=d).value ** 0.5 * 2.0  # = m + d - 2
        if not (0.0 <= mu_gamma <= mu):
            raise InvalidModelError(
                f"growth rate must lie in [0, {mu:g}], got {mu_gamma:g}"
            )
        if mu_gamma <= mu / 2.0:
            return ModelBottom(mu * mu / 4.0)
        return ModelBottom(mu_gamma * (mu - mu_gamma))
    if model == "mckean":
        if m is None or a is None or a <= 0 or m < 2:
            raise InvalidModelError("mckean bound needs m >= 2 and a > 0")
        return ModelBottom((m - 1) ** 2 * a * a / 4.0, is_lower_bound=True)
    raise InvalidModelError(f"unknown model {model!r}")


def fiber_volume_profile(case: SubmersionCase, r) -> np.ndarray:
    """V(x) = vol(F) psi(x)^k along the base (closed fibers only)."""
    vol = case.fiber.volume
    return vol * case.warp.value(r) ** case.fiber.dim
