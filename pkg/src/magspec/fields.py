"""Magnetic field intensities, matrix potentials, and U(1) gauge links.

The field intensity b(x) > 0 is the 2D scalar form of the magnetic 2-form.
Connections are discretized by Peierls substitution: each directed lattice
edge carries a unit-modulus phase u(e) = exp(-i p * integral of theta along
the edge), so plaquette holonomies reproduce the flux gauge-invariantly.

Two global gauges are supported: a Landau-type gauge theta = b(y) x dy for
fields depending on the second coordinate only (valid on the torus, where the
boundary mismatch becomes a twist on wrapping edges), and the symmetric/
azimuthal gauge for radial fields on the centered Dirichlet rectangle.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (BundleInconsistencyError, ConsistencyError,
                     GaugeDomainError, InvalidSpecError, PositivityError,
                     QuantizationError)
from .lattice import Lattice

# 2-point Gauss nodes on [0, 1]
_GAUSS_T = ((1.0 - 1.0 / np.sqrt(3.0)) / 2.0, (1.0 + 1.0 / np.sqrt(3.0)) / 2.0)

LANDAU = "landau"
SYMMETRIC = "symmetric"

MAX_RANK = 8


@dataclass(frozen=True)
class FieldSpec:
    """One of the supported magnetic intensity profiles.

    Presets: ``constant(b)``, ``radial_dip(b_inf, depth, width)``,
    ``radial_bump(b_inf, height, width)``, ``transition(b_minus, b_plus,
    width)``.  Construction rejects profiles that are not strictly positive.
    """

    preset: str
    params: tuple  # ordered (name, value) pairs; kept hashable

    @classmethod
    def constant(cls, b):
        spec = cls("constant", (("b", float(b)),))
        spec._check_positive()
        return spec

    @classmethod
    def radial_dip(cls, b_inf, depth, width=1.0):
        spec = cls("radial_dip", (("b_inf", float(b_inf)), ("depth", float(depth)),
                                  ("width", float(width))))
        if width <= 0:
            raise InvalidSpecError("width must be positive")
        spec._check_positive()
        return spec

    @classmethod
    def radial_bump(cls, b_inf, height, width=1.0):
        spec = cls("radial_bump", (("b_inf", float(b_inf)), ("height", float(height)),
                                   ("width", float(width))))
        if width <= 0:
            raise InvalidSpecError("width must be positive")
        spec._check_positive()
        return spec

    @classmethod
    def transition(cls, b_minus, b_plus, width=1.0):
        spec = cls("transition", (("b_minus", float(b_minus)), ("b_plus", float(b_plus)),
                                  ("width", float(width))))
        if width <= 0:
            raise InvalidSpecError("width must be positive")
        spec._check_positive()
        return spec

    def __getitem__(self, name):
        return dict(self.params)[name]

    def _check_positive(self):
        if self.min_intensity() <= 0:
            raise PositivityError(
                f"field preset {self.preset} with {dict(self.params)} is not "
                f"uniformly positive (min {self.min_intensity():g})")

    def min_intensity(self):
        """Analytic infimum of b over the plane."""
        if self.preset == "constant":
            return self["b"]
        if self.preset == "radial_dip":
            return min(self["b_inf"] - self["depth"], self["b_inf"])
        if self.preset == "radial_bump":
            return min(self["b_inf"] + self["height"], self["b_inf"])
        if self.preset == "transition":
            return min(self["b_minus"], self["b_plus"])
        raise InvalidSpecError(f"unknown preset {self.preset!r}")

    def max_intensity(self):
        """Analytic supremum of b over the plane."""
        if self.preset == "constant":
            return self["b"]
        if self.preset == "radial_dip":
            return max(self["b_inf"] - self["depth"], self["b_inf"])
        if self.preset == "radial_bump":
            return max(self["b_inf"] + self["height"], self["b_inf"])
        if self.preset == "transition":
            return max(self["b_minus"], self["b_plus"])
        raise InvalidSpecError(f"unknown preset {self.preset!r}")

    @property
    def is_radial(self):
        return self.preset in ("constant", "radial_dip", "radial_bump")

    @property
    def is_horizontal(self):
        """True when b depends on the second coordinate only."""
        return self.preset in ("constant", "transition")

    def intensity(self, x, y):
        """Evaluate b at coordinates (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.preset == "constant":
            return np.full(np.broadcast(x, y).shape, self["b"])
        if self.preset == "radial_dip":
            r2 = x * x + y * y
            return self["b_inf"] - self["depth"] * np.exp(-r2 / self["width"] ** 2)
        if self.preset == "radial_bump":
            r2 = x * x + y * y
            return self["b_inf"] + self["height"] * np.exp(-r2 / self["width"] ** 2)
        if self.preset == "transition":
            bm, bp, w = self["b_minus"], self["b_plus"], self["width"]
            return bm + (bp - bm) * 0.5 * (1.0 + np.tanh(y / w))
        raise InvalidSpecError(f"unknown preset {self.preset!r}")

    def antiderivative(self, y):
        """F(y) = integral of b(0, s) ds from 0 to y, for horizontal profiles."""
        y = np.asarray(y, dtype=float)
        if self.preset == "constant":
            return self["b"] * y
        if self.preset == "transition":
            bm, bp, w = self["b_minus"], self["b_plus"], self["width"]
            delta = bp - bm
            return bm * y + delta * (0.5 * y + 0.5 * w * np.log(np.cosh(y / w)))
        raise GaugeDomainError(f"preset {self.preset} is not of the b(y) form")

    def azimuthal_profile(self, r):
        """g(r) with theta = g(r)(x dy - y dx), i.e. enclosed flux / (2 pi r^2).

        Satisfies 2 g + r g' = b(r); closed form for each radial preset, with
        a series-stable branch near r = 0.
        """
        r = np.asarray(r, dtype=float)
        if self.preset == "constant":
            return np.full(r.shape, 0.5 * self["b"])
        if self.preset in ("radial_dip", "radial_bump"):
            amp = -self["depth"] if self.preset == "radial_dip" else self["height"]
            w = self["width"]
            u = (r / w) ** 2
            # (1 - exp(-u)) / u -> 1 as u -> 0
            with np.errstate(invalid="ignore"):
                phi = np.where(u > 0, -np.expm1(-u) / np.where(u > 0, u, 1.0), 1.0)
            return 0.5 * self["b_inf"] + 0.5 * amp * phi
        raise GaugeDomainError(f"preset {self.preset} is not radial")


@dataclass
class ScalarField:
    """Field intensity sampled at sites and plaquette centers."""

    site_values: np.ndarray
    plaquette_values: np.ndarray
    lattice: Lattice
    spec: FieldSpec


@dataclass
class PotentialField:
    """Hermitian r x r energy matrix per site, with sitewise eigenvalues."""

    values: np.ndarray  # (n_sites, r, r) complex
    lattice: Lattice

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[0] != self.lattice.n_sites or v.shape[1] != v.shape[2]:
            raise InvalidSpecError("potential must have shape (n_sites, r, r)")
        if v.shape[1] < 1 or v.shape[1] > MAX_RANK:
            raise InvalidSpecError(f"potential rank must be in 1..{MAX_RANK}")
        scale = max(np.abs(v).max(), 1.0)
        if np.abs(v - v.conj().transpose(0, 2, 1)).max() > 1e-12 * scale:
            raise InvalidSpecError("potential is not Hermitian sitewise")
        self.values = v

    @property
    def rank(self):
        return self.values.shape[1]

    @property
    def eigenvalues(self):
        """Sitewise eigenvalue branches, ascending: shape (n_sites, r)."""
        if self.rank == 1:
            return self.values[:, 0, 0].real.reshape(-1, 1)
        return np.linalg.eigvalsh(self.values)


def zero_potential(lattice, rank=1):
    return PotentialField(np.zeros((lattice.n_sites, rank, rank), dtype=complex), lattice)


def constant_potential(lattice, matrix):
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    return PotentialField(np.broadcast_to(m, (lattice.n_sites,) + m.shape).copy(), lattice)


def gaussian_bump_potential(lattice, height, width=1.0, rank=1):
    """Scalar radial bump height * exp(-|x|^2 / width^2) times the identity."""
    pos = lattice.positions
    prof = height * np.exp(-(pos[:, 0] ** 2 + pos[:, 1] ** 2) / width ** 2)
    vals = np.einsum("i,jk->ijk", prof, np.eye(rank)).astype(complex)
    return PotentialField(vals, lattice)


def sample_field(spec, lattice):
    """Sample b at sites and plaquette centers, verifying positivity."""
    pos = lattice.positions
    site_vals = spec.intensity(pos[:, 0], pos[:, 1])
    cen = lattice.plaquette_centers
    plaq_vals = spec.intensity(cen[:, 0], cen[:, 1])
    worst = min(site_vals.min(), plaq_vals.min())
    if worst <= 0:
        raise PositivityError(f"sampled field intensity reaches {worst:g} <= 0")
    return ScalarField(site_values=site_vals, plaquette_values=plaq_vals,
                       lattice=lattice, spec=spec)


def check_flux_quantization(b, lattice, rel_tol=1e-6):
    """Total flux / (2 pi) as an integer on the torus; None on the rectangle.

    Flux is the plaquette-midpoint sum of b times the cell area.  Raises if
    the ratio is not an integer within the relative tolerance.
    """
    if not lattice.is_torus:
        return None
    total = float(np.sum(b.plaquette_values) * lattice.cell_area)
    c1 = total / (2.0 * np.pi)
    nearest = round(c1)
    if abs(c1 - nearest) > rel_tol * max(1.0, abs(c1)):
        raise QuantizationError(
            f"total flux / 2pi = {c1:.9g} is not an integer; the line bundle "
            f"does not exist on this torus")
    return int(nearest)


@dataclass
class EdgeIntegrals:
    """Line integrals of the connection 1-form along the lattice edges.

    Values follow the lattice edge arrays (one stored orientation; reversal
    negates).  On the torus the Landau-gauge boundary mismatch -Lx*F(y) is
    already folded into the x-wrapping edges, which makes every plaquette sum
    match its flux except the single corner plaquette, whose defect is the
    total flux (invisible modulo 2 pi once multiplied by a quantized p).
    """

    values: np.ndarray
    gauge: str
    lattice: Lattice
    spec: FieldSpec
    total_flux: float | None  # analytic total flux on the torus, else None


def edge_integrals(spec, lattice, gauge):
    """Per-edge 2-point Gauss quadrature of the chosen gauge's 1-form."""
    if gauge == LANDAU:
        if not spec.is_horizontal:
            raise GaugeDomainError(
                f"landau gauge needs b = b(y); preset {spec.preset} is not")
        return _landau_integrals(spec, lattice)
    if gauge == SYMMETRIC:
        if lattice.is_torus:
            raise GaugeDomainError("symmetric gauge is not periodic; use the "
                                   "rectangle domain")
        if not spec.is_radial:
            raise GaugeDomainError(
                f"symmetric gauge needs a radial field; preset {spec.preset} is not")
        return _symmetric_integrals(spec, lattice)
    raise GaugeDomainError(f"unknown gauge {gauge!r}")


def _landau_integrals(spec, lattice):
    # theta = b(y) * x * dy: x-edges contribute 0, y-edges x * int b(s) ds
    pos = lattice.positions
    src = lattice.edge_src
    vals = np.zeros(lattice.n_edges)
    ymask = lattice.edge_axis == 1
    x0 = pos[src[ymask], 0]
    y0 = pos[src[ymask], 1]
    hy = lattice.spacing_y
    quad = np.zeros(x0.size)
    for t in _GAUSS_T:
        quad += 0.5 * spec.intensity(x0, y0 + t * hy)
    vals[ymask] = x0 * hy * quad

    total_flux = None
    if lattice.is_torus:
        # fold the clutching twist -Lx * F(y) into the x-wrapping edges
        wrap_x = (lattice.edge_axis == 0) & lattice.edge_wraps
        yw = pos[src[wrap_x], 1]
        vals[wrap_x] -= lattice.extent_x * spec.antiderivative(yw)
        total_flux = float(lattice.extent_x * spec.antiderivative(lattice.extent_y))
    return EdgeIntegrals(values=vals, gauge=LANDAU, lattice=lattice, spec=spec,
                         total_flux=total_flux)


def _symmetric_integrals(spec, lattice):
    # theta = g(r) (x dy - y dx) with g the azimuthal profile
    pos = lattice.positions
    p0 = pos[lattice.edge_src]
    step = np.where(lattice.edge_axis[:, None] == 0,
                    np.array([lattice.spacing_x, 0.0]),
                    np.array([0.0, lattice.spacing_y]))
    vals = np.zeros(lattice.n_edges)
    for t in _GAUSS_T:
        q = p0 + t * step
        r = np.hypot(q[:, 0], q[:, 1])
        cross = q[:, 0] * step[:, 1] - q[:, 1] * step[:, 0]
        vals += 0.5 * spec.azimuthal_profile(r) * cross
    return EdgeIntegrals(values=vals, gauge=SYMMETRIC, lattice=lattice, spec=spec,
                         total_flux=None)


@dataclass
class GaugeLinks:
    """Unit-modulus phase per directed edge at tensor power p.

    Stored as real phases alpha(e); u(e) = exp(i alpha(e)) and reversal
    conjugates.  On the torus the wrapping twist keeps all plaquette
    holonomies equal to -p * flux modulo 2 pi, which closes only when
    p * total flux is an integer multiple of 2 pi.
    """

    phases: np.ndarray
    p: int
    lattice: Lattice

    @property
    def u(self):
        return np.exp(1j * self.phases)


def gauge_links(ints, p, rel_tol=1e-6):
    """Peierls links u(e) = exp(-i p * edge integral)."""
    p = int(p)
    if p < 1:
        raise InvalidSpecError("tensor power p must be >= 1")
    if ints.lattice.is_torus:
        ratio = p * ints.total_flux / (2.0 * np.pi)
        if abs(ratio - round(ratio)) > rel_tol * max(1.0, abs(ratio)):
            raise BundleInconsistencyError(
                f"p * total flux / 2pi = {ratio:.9g} is not an integer; links "
                f"cannot close into a bundle at p = {p}")
    return GaugeLinks(phases=-p * ints.values, p=p, lattice=ints.lattice)


def trivial_links(lattice, p):
    """Identity links (zero field); handy as a free-Laplacian reference."""
    return GaugeLinks(phases=np.zeros(lattice.n_edges), p=int(p), lattice=lattice)


def plaquette_holonomy(links):
    """Principal-value phase of the counterclockwise 4-link product."""
    u = links.u
    plq = links.lattice.plaquettes
    prod = u[plq[:, 0]] * u[plq[:, 1]] * np.conj(u[plq[:, 2]]) * np.conj(u[plq[:, 3]])
    return np.angle(prod)


def apply_gauge_transform(links, site_phases):
    """u'(i -> j) = phi(i) u(i -> j) conj(phi(j)) for unit site phases."""
    phi = np.asarray(site_phases)
    if phi.shape != (links.lattice.n_sites,):
        raise ConsistencyError("need exactly one phase per site")
    mod = np.abs(phi)
    if np.any(mod == 0):
        raise InvalidSpecError("site phases must be unit modulus (nonzero)")
    ang = np.angle(phi / mod)
    alpha = links.phases + ang[links.lattice.edge_src] - ang[links.lattice.edge_dst]
    return GaugeLinks(phases=alpha, p=links.p, lattice=links.lattice)
