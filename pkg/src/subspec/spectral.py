"""Eigenvalue extraction, spectrum reports, and essential-spectrum probes.

Tridiagonal problems go through LAPACK's Sturm-sequence bisection with
inverse iteration (``eigh_tridiagonal`` with an index range), with a dense
solve as fallback for small systems.  Tensor problems use shift-invert
Lanczos.  Every reported eigenpair carries its relative residual in the
quadrature inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import (
    Grid,
    ModeTag,
    SLOperator,
    TensorOperator,
    TotalFamily,
    assemble_base_operator,
    assemble_schrodinger_operator,
    assemble_total_family,
    build_grid,
    effective_bottom_operator,
    mode_operator,
)
from .errors import InvariantViolationError, ProbeError, SolverError, UnsupportedCaseError
from .geometry import SubmersionCase, WeightedInterval

_DENSE_LIMIT = 200


# ---------------------------------------------------------------------------
# Core solvers
# ---------------------------------------------------------------------------

def smallest_eigenpairs(op: SLOperator, k: int = 1, tol: float = 1e-10):
    """k smallest eigenpairs of a 1-D operator.

    Returns (values, vectors, residuals); vectors live on the unknown nodes
    and are normalized in the quadrature inner product.
    """
    diag, off = op.symmetric_tridiagonal()
    n = len(diag)
    k = min(k, n)
    try:
        if n <= _DENSE_LIMIT:
            dense = np.diag(diag)
            idx = np.arange(n - 1)
            dense[idx, idx + 1] = off
            dense[idx + 1, idx] = off
            vals, vecs = np.linalg.eigh(dense)
            vals, vecs = vals[:k], vecs[:, :k]
        else:
            vals, vecs = sla.eigh_tridiagonal(
                diag, off, select="i", select_range=(0, k - 1)
            )
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:  # pragma: no cover
        raise SolverError(
            f"tridiagonal eigensolver failed on {op.label or 'operator'} "
            f"(n={n}): {exc}"
        ) from exc
    sqrt_mu = np.sqrt(op.mu_kept)
    out_vecs = vecs / sqrt_mu[:, None]
    residuals = np.array([op.residual(out_vecs[:, j], vals[j]) for j in range(k)])
    # backward-error floor: inverse iteration leaves residuals ~ eps * |T|
    norm_t = float(np.max(np.abs(diag)) + (2.0 * np.max(np.abs(off)) if n > 1 else 0.0))
    bounds = tol * np.maximum(1.0, np.abs(vals)) + 100.0 * np.finfo(float).eps * norm_t
    bad = residuals > bounds
    if np.any(bad):
        j = int(np.argmax(residuals / bounds))
        raise SolverError(
            f"eigenpair residual {residuals[j]:.3e} exceeds bound {bounds[j]:.3e} "
            f"for value {vals[j]:.6g} on {op.label or 'operator'} (n={n})"
        )
    return vals, out_vecs, residuals


@dataclass(frozen=True)
class Lambda0Result:
    value: float
    vector: np.ndarray  # full node vector
    residual: float


def lambda0(op, tol: float = 1e-10) -> Lambda0Result:
    """Bottom of the spectrum of a 1-D or tensor operator with its eigenvector."""
    if isinstance(op, TensorOperator):
        vals, vecs, res = tensor_smallest(op, 1, tol=tol)
        full = np.zeros(op.tgrid.shape)
        full[op.keep_r, :] = vecs[:, 0].reshape(len(op.keep_r), op.tgrid.ntheta)
        return Lambda0Result(float(vals[0]), full, float(res[0]))
    vals, vecs, res = smallest_eigenpairs(op, 1, tol=tol)
    return Lambda0Result(float(vals[0]), op.embed(vecs[:, 0]), float(res[0]))


def tensor_smallest(top: TensorOperator, k: int, tol: float = 1e-8,
                    sigma: float = -0.5):
    """k smallest eigenpairs of the tensor operator via shift-invert Lanczos."""
    d = sp.diags(1.0 / np.sqrt(top.mu))
    B = (d @ top.form @ d).tocsc()
    n = B.shape[0]
    try:
        if n <= 2000:
            dense = B.toarray()
            vals, vecs = np.linalg.eigh(dense)
            vals, vecs = vals[:k], vecs[:, :k]
        else:
            vals, vecs = spla.eigsh(B, k=k, sigma=sigma, which="LM")
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
    except Exception as exc:
        raise SolverError(f"tensor eigensolver failed (n={n}): {exc}") from exc
    u = vecs / np.sqrt(top.mu)[:, None]
    residuals = np.array([top.residual(u[:, j], vals[j]) for j in range(k)])
    norm_b = float(np.abs(B).max())
    bounds = tol * np.maximum(1.0, np.abs(vals)) + 1e4 * np.finfo(float).eps * norm_b
    if np.any(residuals > bounds):
        j = int(np.argmax(residuals / bounds))
        raise SolverError(
            f"tensor eigenpair residual {residuals[j]:.3e} exceeds bound "
            f"{bounds[j]:.3e}"
        )
    return vals, u, residuals


# ---------------------------------------------------------------------------
# Low spectrum with mode merging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralValue:
    value: float
    mode: tuple | None  # (index, nu, multiplicity) or None for tensor values
    residual: float


def low_spectrum(target, K: int, tol: float = 1e-10,
                 case: SubmersionCase | None = None,
                 grid: Grid | None = None) -> list[SpectralValue]:
    """First K eigenvalues of a mode family, tensor operator, or 1-D operator.

    Mode families are merged with fiber multiplicities.  When built through
    :func:`total_low_spectrum` the window rule guarantees completeness below
    the cutoff floor.
    """
    if K < 1:
        raise SolverError("K must be at least 1")
    if isinstance(target, TensorOperator):
        vals, _, res = tensor_smallest(target, K, tol=max(tol, 1e-8))
        return [SpectralValue(float(v), None, float(r)) for v, r in zip(vals, res)]
    if isinstance(target, SLOperator):
        vals, _, res = smallest_eigenpairs(target, K, tol)
        tag = None if target.mode is None else (
            target.mode.index, target.mode.nu, target.mode.multiplicity
        )
        return [SpectralValue(float(v), tag, float(r)) for v, r in zip(vals, res)]
    if isinstance(target, TotalFamily):
        return _merge_family(target, K, tol)
    raise UnsupportedCaseError(f"cannot extract a spectrum from {type(target)!r}")


def _merge_family(family: TotalFamily, K: int, tol: float) -> list[SpectralValue]:
    merged: list[SpectralValue] = []
    for op in family:
        vals, _, res = smallest_eigenpairs(op, K, tol)
        tag = (op.mode.index, op.mode.nu, op.mode.multiplicity)
        for v, r in zip(vals, res):
            for _ in range(op.mode.multiplicity):
                merged.append(SpectralValue(float(v), tag, float(r)))
    merged.sort(key=lambda s: s.value)
    return merged[:K]


def total_low_spectrum(case: SubmersionCase, grid: Grid, K: int,
                       tol: float = 1e-10) -> tuple[list[SpectralValue], TotalFamily]:
    """Merged low spectrum of the total space with the adaptive mode cutoff.

    The window top is the K-th mode-0 eigenvalue; levels whose potential
    floor exceeds four times the window are dropped, which guarantees no
    eigenvalue below the recorded floor is missed.  If the merged window
    overruns the guarantee the cutoff is widened once before failing.
    """
    mode0 = mode_operator(case, grid, 0, 0.0)
    vals0, _, _ = smallest_eigenpairs(mode0, K, tol)
    window_top = float(vals0[-1])
    factor = 4.0
    for attempt in range(2):
        family = assemble_total_family(case, grid, window_top=window_top,
                                       window_factor=factor)
        merged = _merge_family(family, K, tol)
        top = merged[-1].value
        if family.guaranteed_below is None or top <= family.guaranteed_below:
            return merged, family
        factor *= 4.0
    raise SolverError(
        f"window {top:.4g} exceeds the cutoff guarantee "
        f"{family.guaranteed_below:.4g} even after widening"
    )


# ---------------------------------------------------------------------------
# Spectrum reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RichardsonInfo:
    coarse_n: int
    fine_n: int
    coarse: float
    fine: float
    extrapolated: float
    error_estimate: float


@dataclass(frozen=True)
class TruncationInfo:
    span: float
    companion_span: float
    value: float
    companion_value: float
    limit_estimate: float
    sensitivity: float


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues with convergence metadata for one target of one case."""

    case: str
    target: str
    lambda0: float
    values: tuple[SpectralValue, ...]
    n: int
    grading: str
    solver_tol: float
    richardson: RichardsonInfo | None = None
    truncation: TruncationInfo | None = None
    mode_cutoff: dict | None = None

    def __post_init__(self):
        vals = [s.value for s in self.values]
        if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
            raise InvariantViolationError("report eigenvalues must be nondecreasing")

    @property
    def budget_discretization(self) -> float:
        return 0.0 if self.richardson is None else self.richardson.error_estimate

    @property
    def budget_truncation(self) -> float:
        return 0.0 if self.truncation is None else self.truncation.sensitivity

    def best_estimate(self) -> float:
        """Truncation-corrected bottom when available, else the raw value."""
        if self.truncation is not None:
            return self.truncation.limit_estimate
        return self.lambda0


def _bottom_operator(case: SubmersionCase, grid: Grid, target: str) -> SLOperator:
    if target == "base":
        return assemble_base_operator(case.base, grid)
    if target == "schrodinger":
        return assemble_schrodinger_operator(case, grid)
    if target == "schrodinger-discrete":
        return assemble_schrodinger_operator(case, grid, discrete=True)
    if target == "total":
        if case.fiber.closed:
            return mode_operator(case, grid, 0, 0.0)
        return effective_bottom_operator(case, grid)
    raise UnsupportedCaseError(f"unknown spectrum target {target!r}")


def _companion_case(case: SubmersionCase, factor: float = 1.5) -> SubmersionCase:
    """Stretch the truncated endpoints by ``factor`` for the sensitivity solve."""
    base = case.base
    span = base.hi - base.lo
    lo, hi = base.lo, base.hi
    if base.truncated_lo and base.truncated_hi:
        mid = 0.5 * (lo + hi)
        lo = mid - factor * (mid - lo)
        hi = mid + factor * (hi - mid)
    elif base.truncated_hi:
        hi = lo + factor * span
    elif base.truncated_lo:
        lo = hi - factor * span
    new_span = hi - lo
    n = max(case.resolution, int(round(case.resolution * new_span / span)))
    return replace(case, base=base.with_range(lo, hi), resolution=n)


def spectrum_report(case: SubmersionCase, target: str = "total",
                    K: int | None = None,
                    with_truncation: bool = True,
                    with_refinement: bool = True) -> SpectrumReport:
    """Solve one target of a case and wrap the convergence metadata.

    The truncation block solves a companion case with the truncated endpoints
    pushed out by half the span and extrapolates the bottom with an inverse
    square tail model; ``sensitivity`` is the distance from the raw value to
    that limit.  Dirichlet truncation approaches the limit from above, so the
    raw bottom is a certified upper estimate.
    """
    K = K or case.num_eigenvalues
    tol = case.tolerances.solver
    grid = build_grid(case.base, case.resolution)
    cutoff_meta = None
    if target == "total" and case.fiber.closed:
        values, family = total_low_spectrum(case, grid, K, tol)
        cutoff_meta = {
            "levels": family.cutoff_index,
            "cutoff_nu": family.cutoff_nu,
            "window_top": family.window_top,
            "guaranteed_below": family.guaranteed_below,
        }
        lam0 = values[0].value
    else:
        op = _bottom_operator(case, grid, target)
        values = low_spectrum(op, K, tol)
        lam0 = values[0].value

    richardson = None
    if with_refinement and case.resolution >= 16:
        coarse_n = case.resolution // 2
        coarse_grid = build_grid(case.base, coarse_n)
        cop = _bottom_operator(case, coarse_grid, target)
        cvals, _, _ = smallest_eigenpairs(cop, 1, max(tol, 1e-9))
        coarse = float(cvals[0])
        extrap = lam0 + (lam0 - coarse) / 3.0
        richardson = RichardsonInfo(
            coarse_n=coarse_n, fine_n=case.resolution,
            coarse=coarse, fine=lam0, extrapolated=extrap,
            error_estimate=abs(lam0 - coarse) / 3.0,
        )

    truncation = None
    if with_truncation and case.base.truncated:
        comp = _companion_case(case)
        comp_grid = build_grid(comp.base, comp.resolution)
        copm = _bottom_operator(comp, comp_grid, target)
        cvals, _, _ = smallest_eigenpairs(copm, 1, max(tol, 1e-9))
        comp_val = float(cvals[0])
        span = case.base.hi - case.base.lo
        comp_span = comp.base.hi - comp.base.lo
        denom = comp_span**2 - span**2
        limit = (comp_val * comp_span**2 - lam0 * span**2) / denom
        truncation = TruncationInfo(
            span=span, companion_span=comp_span,
            value=lam0, companion_value=comp_val,
            limit_estimate=limit, sensitivity=abs(lam0 - limit),
        )

    return SpectrumReport(
        case=case.name, target=target, lambda0=float(lam0),
        values=tuple(values), n=case.resolution, grading="uniform",
        solver_tol=tol, richardson=richardson, truncation=truncation,
        mode_cutoff=cutoff_meta,
    )


# ---------------------------------------------------------------------------
# Exhaustion probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExhaustionProbe:
    """Bottom of the spectrum outside growing compacts, per probe radius."""

    case: str
    target: str
    radii: tuple[float, ...]
    values: tuple[float, ...]
    truncation_span: float

    def __post_init__(self):
        if len(self.radii) != len(self.values):
            raise ProbeError("radii and values length mismatch")

    @property
    def monotone(self) -> bool:
        scale = max(abs(v) for v in self.values) or 1.0
        return all(b >= a - 1e-9 * scale for a, b in zip(self.values, self.values[1:]))


def _probe_pieces(base: WeightedInterval, radius: float) -> list[WeightedInterval]:
    """Complement components of the radius-R compact inside the truncation."""
    pieces = []
    if base.truncated_lo and base.truncated_hi:
        mid = 0.5 * (base.lo + base.hi)
        left = (base.lo, mid - radius)
        right = (mid + radius, base.hi)
        if left[1] <= left[0] or right[1] <= right[0]:
            raise ProbeError(f"radius {radius} exhausts the truncated interval")
        pieces.append(replace(base, lo=left[0], hi=left[1],
                              bc_hi="dirichlet", truncated_hi=False))
        pieces.append(replace(base, lo=right[0], hi=right[1],
                              bc_lo="dirichlet", truncated_lo=False))
    elif base.truncated_hi:
        cut = base.lo + radius
        if cut >= base.hi:
            raise ProbeError(f"radius {radius} exhausts the truncated interval")
        pieces.append(replace(base, lo=cut, hi=base.hi,
                              bc_lo="dirichlet", truncated_lo=False))
    elif base.truncated_lo:
        cut = base.hi - radius
        if cut <= base.lo:
            raise ProbeError(f"radius {radius} exhausts the truncated interval")
        pieces.append(replace(base, lo=base.lo, hi=cut,
                              bc_hi="dirichlet", truncated_hi=False))
    else:
        raise ProbeError(
            "base interval is compact; exhaustion probes need a truncated end"
        )
    return pieces


def _piece_case(case: SubmersionCase, piece: WeightedInterval) -> SubmersionCase:
    span = case.base.hi - case.base.lo
    frac = (piece.hi - piece.lo) / span
    n = max(32, int(round(case.resolution * frac)))
    return replace(case, base=piece, resolution=n)


def exhaustion_probe(case: SubmersionCase, target: str,
                     radii: Sequence[float] | None = None,
                     base_truncation: float | None = None,
                     min_nodes: int | None = None) -> ExhaustionProbe:
    """Bottoms of complement spectra for an increasing radii sequence.

    ``target`` is one of ``base`` (plain Laplacian), ``schrodinger`` (base
    with the volume potential) or ``total``.  The inner cut is always hard
    (Dirichlet); the outer end keeps the case condition.  Base-only targets
    may widen the truncation via ``base_truncation`` so the probe sees the
    manifold rather than the cut-off box.
    """
    probes = case.probes
    radii = tuple(radii if radii is not None else (probes.radii or ()))
    min_nodes = min_nodes or probes.min_nodes
    if target in ("base", "schrodinger"):
        widen = base_truncation if base_truncation is not None else probes.base_truncation
    else:
        widen = base_truncation if base_truncation is not None else probes.total_truncation
    work = case
    if widen is not None:
        base = case.base
        span = base.hi - base.lo
        if base.truncated_lo and base.truncated_hi:
            mid = 0.5 * (base.lo + base.hi)
            newb = base.with_range(mid - widen, mid + widen)
            factor = (2 * widen) / span
        elif base.truncated_hi:
            newb = base.with_range(base.lo, base.lo + widen)
            factor = widen / span
        else:
            newb = base.with_range(base.hi - widen, base.hi)
            factor = widen / span
        work = replace(case, base=newb,
                       resolution=max(case.resolution,
                                      int(round(case.resolution * factor))))
    base = work.base
    if not radii:
        span = base.hi - base.lo
        radii = tuple(np.round(np.linspace(0.05, 0.15, 5) * span, 6))
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ProbeError("probe radii must be strictly increasing")

    tol = max(case.tolerances.solver, 1e-9)
    values = []
    for radius in radii:
        piece_vals = []
        for piece in _probe_pieces(base, radius):
            pc = _piece_case(work, piece)
            grid = build_grid(piece, pc.resolution)
            if grid.n + 1 < min_nodes:
                raise ProbeError(
                    f"complement region at radius {radius} has only "
                    f"{grid.n + 1} nodes"
                )
            op = _bottom_operator(pc, grid, target)
            vals, _, _ = smallest_eigenpairs(op, 1, tol)
            piece_vals.append(float(vals[0]))
        values.append(min(piece_vals))
    return ExhaustionProbe(case=case.name, target=target, radii=tuple(radii),
                           values=tuple(values),
                           truncation_span=base.hi - base.lo)


@dataclass(frozen=True)
class DiscretenessVerdict:
    classification: str  # "discrete-indicated" | "essential-spectrum-indicated"
    limit_estimate: float | None
    slope: float
    threshold: float

    @property
    def discrete(self) -> bool:
        return self.classification == "discrete-indicated"


def discreteness_verdict(probe: ExhaustionProbe,
                         slope_threshold: float = 0.5) -> DiscretenessVerdict:
    """Classify a probe by the log-log growth of its tail.

    A fitted slope above the threshold across the last half of the points
    indicates unbounded growth (discrete spectrum); otherwise the sequence is
    read as a plateau and the limit is estimated by Aitken extrapolation when
    the increments contract, else by the last value.
    """
    if len(probe.radii) < 4:
        raise ProbeError("discreteness verdict needs at least 4 probe points")
    if not probe.monotone:
        raise InvariantViolationError(
            f"probe values are not nondecreasing: {probe.values}"
        )
    half = len(probe.radii) // 2
    r = np.asarray(probe.radii[half - 1:], dtype=float)
    v = np.maximum(np.asarray(probe.values[half - 1:], dtype=float), 1e-300)
    slope = float(np.polyfit(np.log(r), np.log(v), 1)[0])
    if slope > slope_threshold:
        return DiscretenessVerdict("discrete-indicated", None, slope, slope_threshold)
    vals = probe.values
    estimate = vals[-1]
    if len(vals) >= 3:
        d1 = vals[-2] - vals[-3]
        d2 = vals[-1] - vals[-2]
        if d1 > 0 and 0 < d2 < d1:
            estimate = vals[-1] + d2 * d2 / (d1 - d2)
    return DiscretenessVerdict("essential-spectrum-indicated", float(estimate),
                               slope, slope_threshold)
