"""Grids, weighted Sturm-Liouville assembly, tensor operators, transfer maps.

The scheme is conservative second-order finite differences.  Stiffness
entries between neighboring nodes sample the base density at the cell
midpoint and the warp factor as the geometric mean of its node values;
node quadrature weights are density * warp^k * cell length.  With the
discrete volume potential of :func:`discrete_volume_potential` this makes
the conjugation by sqrt(V) an exact matrix identity, so the mode-0 total
operator, the renormalized operator and the potential form agree to
rounding, not merely to O(h^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    AssemblyError,
    GridMismatchError,
    SUndefinedError,
    UnsupportedCaseError,
)
from .geometry import SubmersionCase, WeightedInterval, fiber_volume_profile

GRADINGS = ("uniform", "tanh-clustered")
_TANH_BETA = 2.0


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes covering a case range exactly."""

    nodes: np.ndarray
    grading: str = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
            raise AssemblyError("grid nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.nodes) - 1

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def cells(self) -> np.ndarray:
        """Dual-cell lengths; half cells at the endpoints."""
        h = self.spacings
        return np.concatenate([[h[0] / 2], 0.5 * (h[:-1] + h[1:]), [h[-1] / 2]])


def build_grid(interval: WeightedInterval, n: int, grading: str = "uniform") -> Grid:
    """Deterministic grid with n cells on the interval.

    ``tanh-clustered`` compresses spacing toward both endpoints.
    """
    if grading not in GRADINGS:
        raise AssemblyError(f"unknown grading {grading!r}")
    if interval.hi - interval.lo <= 0:
        raise AssemblyError("degenerate range")
    t = np.linspace(0.0, 1.0, n + 1)
    if grading == "uniform":
        s = t
    else:
        s = 0.5 * (1.0 + np.tanh(_TANH_BETA * (2.0 * t - 1.0)) / np.tanh(_TANH_BETA))
        s[0], s[-1] = 0.0, 1.0
    nodes = interval.lo + (interval.hi - interval.lo) * s
    return Grid(nodes=nodes, grading=grading)


# ---------------------------------------------------------------------------
# Grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Node values together with the quadrature measure of their grid."""

    values: np.ndarray
    measure: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.measure, dtype=float)
        if v.shape != m.shape:
            raise GridMismatchError("values and measure shapes differ")
        if not np.all(np.isfinite(v)):
            raise GridMismatchError("grid function carries non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measure", m)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.measure * self.values**2)))


# ---------------------------------------------------------------------------
# 1-D weighted operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeTag:
    index: int
    nu: float
    multiplicity: int = 1


@dataclass(frozen=True)
class SLOperator:
    """Discrete weighted operator -(w_eff u')'/w_eff + q on a grid.

    Self-adjoint in the inner product with weights ``mu``; rows at hard
    (dirichlet) endpoints are removed, natural endpoints keep their
    half-cell row.  ``edge`` holds the stiffness coefficient per grid cell,
    ``mu`` and ``q`` live on all nodes; ``keep`` indexes the retained nodes.
    """

    grid: Grid
    mu: np.ndarray
    edge: np.ndarray
    q: np.ndarray
    keep: np.ndarray
    mode: ModeTag | None = None
    label: str = ""

    def __post_init__(self):
        for name in ("mu", "edge", "q", "keep"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.mu <= 0):
            raise AssemblyError("quadrature weights must be positive")

    # -- basic structure ------------------------------------------------------

    @property
    def n_unknowns(self) -> int:
        return len(self.keep)

    @property
    def mu_kept(self) -> np.ndarray:
        return self.mu[self.keep]

    def embed(self, u: np.ndarray) -> np.ndarray:
        """Unknown vector -> full node vector with zeros at removed nodes."""
        full = np.zeros(self.grid.n + 1)
        full[self.keep] = u
        return full

    def restrict(self, values: np.ndarray, check: bool = True) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise GridMismatchError("full node vector has wrong length")
        if check:
            dropped = np.setdiff1d(np.arange(self.grid.n + 1), self.keep)
            scale = np.max(np.abs(values)) or 1.0
            if np.any(np.abs(values[dropped]) > 1e-12 * scale):
                raise GridMismatchError(
                    "function violates the hard boundary constraints"
                )
        return values[self.keep]

    # -- operator action --------------------------------------------------------

    def apply_full(self, values: np.ndarray) -> np.ndarray:
        """Flux-form action on a full node vector (boundary rows natural)."""
        h = self.grid.spacings
        flux = self.edge * np.diff(values) / h
        out = np.zeros_like(values)
        out[0] = -flux[0]
        out[1:-1] = flux[:-1] - flux[1:]
        out[-1] = flux[-1]
        return out / self.mu + self.q * values

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.apply_full(self.embed(u))[self.keep]

    def quadratic_form(self, values: np.ndarray) -> float:
        h = self.grid.spacings
        grad = np.diff(values) / h
        energy = float(np.sum(self.edge * grad * grad * h))
        kept = self.keep
        return energy + float(np.sum(self.mu[kept] * self.q[kept] * values[kept] ** 2))

    def rayleigh(self, values: np.ndarray) -> float:
        """<A f, f>_mu / <f, f>_mu for a full node vector.

        The vector must vanish at hard endpoints and be nonzero.
        """
        u = self.restrict(np.asarray(values, dtype=float))
        den = float(np.sum(self.mu_kept * u * u))
        if den == 0.0:
            raise GridMismatchError("rayleigh quotient of the zero function")
        return self.quadratic_form(self.embed(u)) / den

    def residual(self, u: np.ndarray, lam: float) -> float:
        """mu-norm relative residual ||(A - lam) u|| / ||u||."""
        r = self.apply(u) - lam * u
        mu = self.mu_kept
        return float(np.sqrt(np.sum(mu * r * r) / np.sum(mu * u * u)))

    # -- symmetric reduction -----------------------------------------------------

    def symmetric_tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, off-diagonal) of the mu-symmetrized retained system."""
        h = self.grid.spacings
        keep = self.keep
        n = self.grid.n
        diag = np.zeros(len(keep))
        left = keep > 0
        right = keep < n
        diag[left] += self.edge[keep[left] - 1] / h[keep[left] - 1]
        diag[right] += self.edge[keep[right]] / h[keep[right]]
        diag = diag / self.mu[keep] + self.q[keep]
        ek = keep[:-1]
        off = -self.edge[ek] / h[ek] / np.sqrt(self.mu[ek] * self.mu[ek + 1])
        return diag, off

    def symmetry_defect(self) -> float:
        """Relative asymmetry of mu_i A_ij in floating point."""
        h = self.grid.spacings
        keep = self.keep
        ek = keep[:-1]
        lower = self.mu[ek] * (-self.edge[ek] / h[ek] / self.mu[ek])
        upper = self.mu[ek + 1] * (-self.edge[ek] / h[ek] / self.mu[ek + 1])
        scale = np.max(np.abs(lower)) or 1.0
        return float(np.max(np.abs(lower - upper)) / scale)

    # -- export -------------------------------------------------------------------

    def to_triplets(self) -> list[tuple[int, int, float]]:
        """Sparse rows of the retained operator as (row, col, value)."""
        h = self.grid.spacings
        keep = self.keep
        pos = {int(i): j for j, i in enumerate(keep)}
        out = []
        diag, _ = self.symmetric_tridiagonal()
        # report the mu-form (non-symmetrized) matrix
        for j, i in enumerate(keep):
            dval = 0.0
            if i > 0:
                dval += self.edge[i - 1] / h[i - 1]
            if i < self.grid.n:
                dval += self.edge[i] / h[i]
            out.append((j, j, dval / self.mu[i] + self.q[i]))
            if i + 1 in pos:
                out.append((j, pos[i + 1], -self.edge[i] / h[i] / self.mu[i]))
            if i - 1 in pos:
                out.append((j, pos[i - 1], -self.edge[i - 1] / h[i - 1] / self.mu[i]))
        return sorted(out)

    def write_triplets(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# row\tcol\tvalue\n")
            for row, col, val in self.to_triplets():
                fh.write(f"{row}\t{col}\t{val!r}\n")


def _effective_bc(bc: str, nu: float) -> str:
    """Boundary handling per mode: poles are natural for nu = 0, hard otherwise."""
    if bc == "dirichlet":
        return "dirichlet"
    if bc == "neumann":
        return "natural"
    if bc == "pole-regular":
        return "natural" if nu == 0.0 else "dirichlet"
    raise AssemblyError(f"unknown boundary condition {bc!r}")


def _assemble(interval: WeightedInterval, grid: Grid,
              warp=None, warp_power: int = 0,
              q=None, nu: float = 0.0,
              bc_override: tuple[str, str] | None = None,
              mode: ModeTag | None = None, label: str = "") -> SLOperator:
    """Shared assembly path for base, renormalized and mode operators."""
    nodes = grid.nodes
    if not (np.isclose(nodes[0], interval.lo) and np.isclose(nodes[-1], interval.hi)):
        raise AssemblyError("grid does not cover the interval exactly")
    h = grid.spacings
    cells = grid.cells
    w_nodes = interval.weight.value(nodes)
    w_edges = interval.weight.value(grid.midpoints)
    if np.any(w_nodes[1:-1] <= 0) or np.any(w_edges <= 0):
        raise AssemblyError("interval density must be positive at interior nodes")

    if warp is not None and warp_power > 0:
        psi = warp.value(nodes)
        warp_nodes = psi**warp_power
        warp_edges = np.sqrt(warp_nodes[:-1] * warp_nodes[1:])
    else:
        warp_nodes = np.ones_like(w_nodes)
        warp_edges = np.ones(grid.n)

    mu = w_nodes * warp_nodes * cells
    edge = w_edges * warp_edges

    bc = bc_override or (interval.bc_lo, interval.bc_hi)
    eff = (_effective_bc(bc[0], nu), _effective_bc(bc[1], nu))

    # a vanishing density at a natural pole gets its half cell weighted a
    # quarter point into the domain, keeping mu positive at second order
    if eff[0] == "natural" and w_nodes[0] <= 0:
        mu[0] = float(interval.weight.value(nodes[0] + h[0] / 4)) * (h[0] / 2) * warp_nodes[0]
    if eff[1] == "natural" and w_nodes[-1] <= 0:
        mu[-1] = float(interval.weight.value(nodes[-1] - h[-1] / 4)) * (h[-1] / 2) * warp_nodes[-1]
    if eff[0] == "dirichlet" and w_nodes[0] <= 0:
        mu[0] = mu[1]  # removed row; any positive value satisfies the invariant
    if eff[1] == "dirichlet" and w_nodes[-1] <= 0:
        mu[-1] = mu[-2]

    if q is None:
        qv = np.zeros(grid.n + 1)
    elif callable(q):
        qv = np.asarray(q(nodes), dtype=float)
    else:
        qv = np.asarray(q, dtype=float)
        if qv.shape != nodes.shape:
            raise AssemblyError("potential samples do not match the grid")

    lo = 0 if eff[0] == "natural" else 1
    hi = grid.n + 1 if eff[1] == "natural" else grid.n
    keep = np.arange(lo, hi)
    if len(keep) < 2:
        raise AssemblyError("operator has fewer than two unknowns")
    return SLOperator(grid=grid, mu=mu, edge=edge, q=qv, keep=keep,
                      mode=mode, label=label)


def assemble_base_operator(interval: WeightedInterval, grid: Grid,
                           q=None,
                           bc_override: tuple[str, str] | None = None,
                           label: str = "base") -> SLOperator:
    """Weighted operator -(w u')'/w + q on the interval.

    Pole-regular endpoints impose the natural (reflection) condition here;
    modes with a positive fiber eigenvalue must use
    :func:`assemble_total_family`, which hardens them to zero.
    """
    return _assemble(interval, grid, q=q, bc_override=bc_override, label=label)


def discrete_volume_potential(interval: WeightedInterval, grid: Grid,
                              phi: np.ndarray) -> np.ndarray:
    """Potential -(Delta_h phi)/phi through the discrete base stencil.

    Using this potential (instead of the analytic one) makes the
    renormalization by phi an exact matrix identity; endpoint entries use the
    natural one-sided stencil and differ from the interior analytic values.
    """
    plain = _assemble(interval, grid, bc_override=("neumann", "neumann"))
    return -plain.apply_full(np.asarray(phi, dtype=float)) / phi


def assemble_renormalized_operator(case: SubmersionCase, grid: Grid,
                                   label: str = "renormalized") -> SLOperator:
    """Weighted Laplacian with weight w * psi^k: the sqrt(V)-renormalized form.

    This is, entry for entry, the mode-0 operator of the total family.
    """
    return _assemble(case.base, grid, warp=case.warp, warp_power=case.fiber.dim,
                     nu=0.0, mode=ModeTag(0, 0.0, 1), label=label)


def assemble_schrodinger_operator(case: SubmersionCase, grid: Grid,
                                  potential=None,
                                  discrete: bool = False,
                                  bc_override: tuple[str, str] | None = None) -> SLOperator:
    """Base operator with the fiber-volume potential.

    ``discrete=True`` derives the potential from sqrt(V) through the assembled
    stencil (exact conjugation partner of the mode-0 operator); otherwise the
    analytic potential is sampled, with pole endpoints taking their limit
    value.
    """
    from .geometry import VolumePotential, schrodinger_potential

    if discrete:
        phi = np.sqrt(fiber_volume_profile(case, grid.nodes))
        qv = discrete_volume_potential(case.base, grid, phi)
        return _assemble(case.base, grid, q=qv, bc_override=bc_override,
                         label="schrodinger[discrete]")
    pot = potential if potential is not None else schrodinger_potential(case)
    nodes = grid.nodes
    qv = np.asarray(pot.primary(nodes), dtype=float)
    base = case.base
    if base.bc_lo == "pole-regular":
        qv[0] = pot.value_at_pole(base.lo)
    if base.bc_hi == "pole-regular":
        qv[-1] = pot.value_at_pole(base.hi)
    return _assemble(case.base, grid, q=qv, bc_override=bc_override,
                     label="schrodinger")


def mode_operator(case: SubmersionCase, grid: Grid, index: int, nu: float,
                  multiplicity: int = 1) -> SLOperator:
    """Separated operator of one fiber level: weight w psi^k, potential nu/psi^2."""
    if not case.fiber.closed:
        raise UnsupportedCaseError("mode family needs a closed fiber")
    qv = None
    if nu != 0.0:
        psi2 = case.warp.value(grid.nodes) ** 2
        qv = nu / psi2
    return _assemble(case.base, grid, warp=case.warp, warp_power=case.fiber.dim,
                     q=qv, nu=nu, mode=ModeTag(index, nu, multiplicity),
                     label=f"mode[{index}]")


def effective_bottom_operator(case: SubmersionCase, grid: Grid) -> SLOperator:
    """Total-space bottom operator for a noncompact fiber.

    The fiber contributes its bottom as the potential lambda0(F)/psi^2; the
    bottom of the total spectrum equals the bottom of this operator.
    """
    if case.fiber.closed:
        raise UnsupportedCaseError("effective bottom path is for noncompact fibers")
    lam_f = case.fiber.lambda0
    qv = None
    if lam_f != 0.0:
        qv = lam_f / case.warp.value(grid.nodes) ** 2
    return _assemble(case.base, grid, warp=case.warp, warp_power=case.fiber.dim,
                     q=qv, nu=lam_f, label="effective-bottom")


@dataclass(frozen=True)
class TotalFamily:
    """Separated mode operators of the total space plus the cutoff record."""

    operators: tuple[SLOperator, ...]
    cutoff_index: int
    cutoff_nu: float | None
    window_top: float | None
    guaranteed_below: float | None

    def __iter__(self):
        return iter(self.operators)


def assemble_total_family(case: SubmersionCase, grid: Grid,
                          window_top: float | None = None,
                          J: int | None = None,
                          window_factor: float = 4.0) -> TotalFamily:
    """Mode operators for all fiber levels that can reach the spectral window.

    With ``window_top`` given, the cutoff level is the smallest J whose
    shifted potential floor nu_J / max(psi)^2 exceeds ``window_factor *
    window_top``; eigenvalues below ``guaranteed_below`` are then complete.
    An explicit ``J`` keeps the first J+1 levels instead.
    """
    fiber = case.fiber
    if not fiber.closed:
        raise UnsupportedCaseError(
            "separated family needs a closed fiber; use the effective-bottom "
            "or tensor path"
        )
    psi_max = float(np.max(case.warp.value(grid.nodes)))
    if J is None and window_top is None:
        J = case.mode_cutoff if case.mode_cutoff is not None else 8
    if J is not None:
        levels = []
        nu_cap = 1.0
        while len(levels) < J + 1:
            levels = fiber.distinct_levels(nu_cap)
            if fiber.kind == "explicit" and nu_cap > max(fiber.values):
                break
            nu_cap *= 4.0
        levels = levels[: J + 1]
        guaranteed = None
        cutoff_nu = None
    else:
        floor_target = window_factor * max(window_top, 0.0)
        nu_needed = floor_target * psi_max**2
        levels = fiber.distinct_levels(nu_needed)
        beyond = fiber.distinct_levels(4.0 * nu_needed + 1.0)
        if len(beyond) > len(levels):
            cutoff_nu = beyond[len(levels)][0]
            guaranteed = cutoff_nu / psi_max**2
        else:
            cutoff_nu = None
            guaranteed = None  # fiber spectrum exhausted (explicit lists)
    ops = tuple(
        mode_operator(case, grid, j, nu, mult) for j, (nu, mult) in enumerate(levels)
    )
    return TotalFamily(operators=ops, cutoff_index=len(levels),
                       cutoff_nu=cutoff_nu if J is None else None,
                       window_top=window_top,
                       guaranteed_below=guaranteed if J is None else None)


# ---------------------------------------------------------------------------
# Tensor (2-D) path for circle fibers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorGrid:
    """Base grid x uniform periodic circle grid, with warp samples."""

    rgrid: Grid
    ntheta: int
    circumference: float
    psi: np.ndarray

    @property
    def harc(self) -> float:
        return self.circumference / self.ntheta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rgrid.n + 1, self.ntheta)

    def fiber_measure(self) -> np.ndarray:
        """Arc-length measure of one fiber node per base node: psi * harc."""
        return self.psi * self.harc


def tensor_grid(case: SubmersionCase, rgrid: Grid, ntheta: int | None = None) -> TensorGrid:
    if case.fiber.kind != "circle":
        raise UnsupportedCaseError("tensor path supports circle fibers only")
    ntheta = ntheta or case.tensor_ntheta
    if ntheta < 8:
        raise UnsupportedCaseError("tensor path needs at least 8 fiber nodes")
    psi = case.warp.value(rgrid.nodes)
    return TensorGrid(rgrid=rgrid, ntheta=ntheta,
                      circumference=case.fiber.volume, psi=psi)


@dataclass(frozen=True)
class TensorOperator:
    """Five-point weighted Laplacian on dr^2 + psi(r)^2 dtheta^2.

    ``form`` is the symmetric quadratic-form matrix over the retained
    (r index major, theta index minor) nodes; the operator action is
    diag(1/mu) @ form.
    """

    tgrid: TensorGrid
    form: sp.csr_matrix
    mu: np.ndarray
    keep_r: np.ndarray
    edge_r: np.ndarray      # per r-cell stiffness (density x warp geometric mean)
    theta_coeff: np.ndarray  # per node w * cell / psi

    @property
    def n_unknowns(self) -> int:
        return len(self.mu)

    def _flatten(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.tgrid.shape:
            raise GridMismatchError("tensor function has wrong shape")
        return values[self.keep_r, :].ravel()

    def restrict(self, values: np.ndarray, check: bool = True) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if check:
            dropped = np.setdiff1d(np.arange(self.tgrid.rgrid.n + 1), self.keep_r)
            scale = np.max(np.abs(values)) or 1.0
            if np.any(np.abs(values[dropped, :]) > 1e-12 * scale):
                raise GridMismatchError("function violates the hard boundary rows")
        return self._flatten(values)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return (self.form @ u) / self.mu

    def quadratic_form(self, values: np.ndarray) -> float:
        u = self.restrict(values)
        return float(u @ (self.form @ u))

    def rayleigh(self, values: np.ndarray) -> float:
        u = self.restrict(values)
        den = float(np.sum(self.mu * u * u))
        if den == 0.0:
            raise GridMismatchError("rayleigh quotient of the zero function")
        return float(u @ (self.form @ u)) / den

    def energy_split(self, values: np.ndarray) -> tuple[float, float]:
        """(horizontal, vertical) discrete Dirichlet energies of a function."""
        F = np.asarray(values, dtype=float)
        if F.shape != self.tgrid.shape:
            raise GridMismatchError("tensor function has wrong shape")
        tg = self.tgrid
        h = tg.rgrid.spacings
        dr = (F[1:, :] - F[:-1, :]) / h[:, None]
        horizontal = float(np.sum(self.edge_r[:, None] * dr * dr * h[:, None]) * tg.harc)
        dth = (np.roll(F, -1, axis=1) - F) / tg.harc
        vertical = float(np.sum(self.theta_coeff[:, None] * dth * dth) * tg.harc)
        return horizontal, vertical

    def symmetry_defect(self) -> float:
        delta = self.form - self.form.T
        scale = max(np.abs(self.form.data).max(), 1.0)
        if delta.nnz == 0:
            return 0.0
        return float(np.abs(delta.data).max() / scale)

    def residual(self, u: np.ndarray, lam: float) -> float:
        r = self.apply(u) - lam * u
        return float(np.sqrt(np.sum(self.mu * r * r) / np.sum(self.mu * u * u)))

    def write_triplets(self, path) -> None:
        coo = self.form.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write("# row\tcol\tvalue\n")
            for i in order:
                fh.write(f"{coo.row[i]}\t{coo.col[i]}\t{coo.data[i]!r}\n")


def assemble_total_tensor(case: SubmersionCase, rgrid: Grid,
                          ntheta: int | None = None) -> TensorOperator:
    """Cross-validation operator on the full 2-D grid (circle fibers).

    Pole endpoints are not supported on this path; configure tensor checks on
    a pole-free subrange.
    """
    base = case.base
    if base.has_pole:
        raise UnsupportedCaseError(
            "tensor path does not handle pole endpoints; use a pole-free "
            "tensor range"
        )
    tg = tensor_grid(case, rgrid, ntheta)
    n, m = rgrid.n, tg.ntheta
    h = rgrid.spacings
    cells = rgrid.cells
    w_nodes = base.weight.value(rgrid.nodes)
    w_edges = base.weight.value(rgrid.midpoints)
    if np.any(w_nodes[1:-1] <= 0) or np.any(w_edges <= 0):
        raise AssemblyError("interval density must be positive at interior nodes")
    psi = tg.psi
    edge_r = w_edges * np.sqrt(psi[:-1] * psi[1:])
    mu_r = w_nodes * psi * cells
    theta_coeff = w_nodes * cells / psi

    lo = 0 if base.bc_lo == "neumann" else 1
    hi = n + 1 if base.bc_hi == "neumann" else n
    keep_r = np.arange(lo, hi)
    nr = len(keep_r)
    if nr < 2:
        raise AssemblyError("tensor operator has too few base rows")
    N = nr * m
    mu = np.repeat(mu_r[keep_r] * tg.harc, m)

    rows, cols, vals = [], [], []
    diag = np.zeros(N)
    base_ids = np.arange(N).reshape(nr, m)

    # r-direction fluxes (cell c couples nodes c and c+1)
    for jr in range(nr):
        i = keep_r[jr]
        for cell_idx, neighbor in ((i - 1, jr - 1), (i, jr + 1)):
            if cell_idx < 0 or cell_idx >= n:
                continue
            c = edge_r[cell_idx] / h[cell_idx] * tg.harc
            diag[base_ids[jr]] += c
            if 0 <= neighbor < nr and keep_r[neighbor] == i + (1 if neighbor == jr + 1 else -1):
                rows.append(base_ids[jr])
                cols.append(base_ids[neighbor])
                vals.append(np.full(m, -c))

    # theta-direction fluxes (periodic)
    for jr in range(nr):
        i = keep_r[jr]
        c = theta_coeff[i] / tg.harc
        diag[base_ids[jr]] += 2.0 * c
        for shift in (1, -1):
            rows.append(base_ids[jr])
            cols.append(np.roll(base_ids[jr], -shift))
            vals.append(np.full(m, -c))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    form = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    form = form + sp.diags(diag)
    return TensorOperator(tgrid=tg, form=form.tocsr(), mu=mu, keep_r=keep_r,
                          edge_r=edge_r, theta_coeff=theta_coeff)


# ---------------------------------------------------------------------------
# Transfer maps
# ---------------------------------------------------------------------------

def lift(f: np.ndarray, tgrid: TensorGrid) -> np.ndarray:
    """Replicate a base function across the fiber nodes."""
    f = np.asarray(f, dtype=float)
    if f.shape != (tgrid.rgrid.n + 1,):
        raise GridMismatchError("base function does not match the tensor grid")
    return np.tile(f[:, None], (1, tgrid.ntheta))


def average(F: np.ndarray, tgrid: TensorGrid) -> np.ndarray:
    """Fiber quadrature per base node; average(lift(f)) = f * V."""
    F = np.asarray(F, dtype=float)
    if F.shape != tgrid.shape:
        raise GridMismatchError("tensor function has wrong shape")
    return np.sum(F, axis=1) * tgrid.fiber_measure()


def pushdown(F: np.ndarray, tgrid: TensorGrid) -> np.ndarray:
    """Nonnegative base function g with g^2 = average(F^2)."""
    F = np.asarray(F, dtype=float)
    if F.shape != tgrid.shape:
        raise GridMismatchError("tensor function has wrong shape")
    return np.sqrt(np.sum(F * F, axis=1) * tgrid.fiber_measure())


def rayleigh(op, f) -> float:
    """Rayleigh quotient of a grid function against a 1-D or tensor operator."""
    values = f.values if isinstance(f, GridFunction) else f
    return op.rayleigh(values)
