"""Shared builders for test instances."""

import numpy as np
import scipy.sparse as sp

from magspec.operators import SparseHermitian
from magspec import (FieldSpec, assemble_H, build_lattice, edge_integrals,
                     gauge_links, gaussian_bump_potential, sample_field,
                     zero_potential)

TWO_PI = 2 * np.pi


def op_from_dense(a, p=1, spacing=(1.0, 1.0), rank=1, hermitian=True,
                  lattice=None):
    return SparseHermitian(matrix=sp.csr_matrix(np.asarray(a, dtype=complex)),
                           p=p, spacing=spacing, rank=rank,
                           hermitian=hermitian, lattice=lattice)


def torus_constant_setup(nx=24, p=4, c1=1):
    """Torus of side 2 pi with constant field of Chern number c1."""
    lat = build_lattice("torus", TWO_PI, TWO_PI, nx, nx)
    spec = FieldSpec.constant(c1 / TWO_PI)
    b = sample_field(spec, lat)
    links = gauge_links(edge_integrals(spec, lat, "landau"), p)
    V = zero_potential(lat)
    return lat, spec, b, links, V, assemble_H(lat, links, V, p)


def bump_rectangle_setup(nx=48, p=8, half_width=2.2, height=1.0):
    """Dirichlet square, constant unit field, Gaussian potential bump."""
    lat = build_lattice("rectangle_dirichlet", 2 * half_width, 2 * half_width,
                        nx, nx)
    spec = FieldSpec.constant(1.0)
    b = sample_field(spec, lat)
    links = gauge_links(edge_integrals(spec, lat, "symmetric"), p)
    V = gaussian_bump_potential(lat, height, 1.0)
    return lat, spec, b, links, V, assemble_H(lat, links, V, p)


def dip_rectangle_setup(nx=48, p=8, half_width=2.2):
    """Dirichlet square with the radial field dip 1 - 0.3 exp(-|x|^2)."""
    lat = build_lattice("rectangle_dirichlet", 2 * half_width, 2 * half_width,
                        nx, nx)
    spec = FieldSpec.radial_dip(1.0, 0.3, 1.0)
    b = sample_field(spec, lat)
    links = gauge_links(edge_integrals(spec, lat, "symmetric"), p)
    V = zero_potential(lat)
    return lat, spec, b, links, V, assemble_H(lat, links, V, p)
