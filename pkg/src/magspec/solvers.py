"""Eigensolvers: dense oracle, lowest-m, and certified interior windows.

All returned residuals are recomputed from the matrix, never trusted from
the solver.  Interior windows are solved by shift-invert Krylov iteration at
the window midpoint; completeness is certified by inertia counts read off a
symmetric-mode diagonal-pivot factorization (Sylvester's law), and silently
downgraded to a heuristic certificate whenever the factorization had to
pivot asymmetrically.  Start vectors are seeded, so runs are reproducible.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (ConvergenceError, DenseSizeError, NotHermitianError,
                     WindowError)
from .operators import gershgorin_interval

DENSE_GUARD = 4096
CERTIFIED = "certified"
HEURISTIC = "heuristic"

BSEV_MAGIC = b"BSEV"
BSEV_VERSION = 1

_SEED_BASE = 0xB05E


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


@dataclass
class SpectrumSlice:
    """Eigenpairs sorted ascending with a completeness certificate."""

    values: np.ndarray
    vectors: np.ndarray          # (n, k), columns unit norm
    residuals: np.ndarray
    certificate: str
    window: tuple | None = None
    requested: int | None = None
    tol: float = 0.0

    def __len__(self):
        return self.values.size

    @property
    def pairs(self):
        return [EigenPair(float(self.values[i]), self.vectors[:, i],
                          float(self.residuals[i])) for i in range(len(self))]

    def select(self, keep):
        keep = np.asarray(keep)
        return SpectrumSlice(values=self.values[keep],
                             vectors=self.vectors[:, keep],
                             residuals=self.residuals[keep],
                             certificate=self.certificate,
                             window=self.window, requested=self.requested,
                             tol=self.tol)


def default_tol(op):
    lo, hi = gershgorin_interval(op)
    return 1e-8 * max(1.0, abs(lo), abs(hi))


def _start_vector(n, seed):
    rng = np.random.default_rng(_SEED_BASE + int(seed))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _residuals(op, values, vectors):
    resid = op.matrix @ vectors - vectors * values[None, :]
    return np.linalg.norm(resid, axis=0)


def _orthonormalize_clusters(values, vectors):
    """QR within numerically degenerate eigenvalue groups.

    The Krylov backend returns eigenvectors that need not be mutually
    orthogonal inside an exactly degenerate cluster; re-orthonormalizing the
    cluster block keeps each column an eigenvector (same invariant subspace)
    while restoring a clean Gram matrix.
    """
    n = values.size
    if n == 0:
        return vectors
    tol = 1e-9 * max(1.0, float(np.abs(values).max()))
    i = 0
    while i < n:
        j = i + 1
        while j < n and values[j] - values[j - 1] <= tol:
            j += 1
        if j - i > 1:
            q, _ = np.linalg.qr(vectors[:, i:j])
            vectors[:, i:j] = q
        i = j
    return vectors


def _sorted_slice(op, values, vectors, certificate, window=None,
                  requested=None, tol=0.0):
    order = np.argsort(values)
    values = np.asarray(values)[order]
    vectors = np.array(vectors)[:, order]
    vectors = _orthonormalize_clusters(values, vectors)
    residuals = _residuals(op, values, vectors)
    return SpectrumSlice(values=values, vectors=vectors, residuals=residuals,
                         certificate=certificate, window=window,
                         requested=requested, tol=tol)


def count_below(op, sigma, attempts=3):
    """Number of eigenvalues strictly below sigma, via inertia.

    Factorizes H - sigma in SuperLU symmetric mode with diagonal pivots; the
    signs of the real U diagonal then give the inertia (Sylvester).  Returns
    (count, trustworthy); the count is untrustworthy whenever the
    factorization pivoted off the diagonal or produced a non-real diagonal.
    """
    n = op.n
    shift = float(sigma)
    for attempt in range(attempts):
        mat = (op.matrix - shift * sp.identity(n, dtype=complex,
                                               format="csr")).tocsc()
        try:
            lu = spla.splu(mat, permc_spec="MMD_AT_PLUS_A",
                           diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError:
            shift += max(1e-10, 1e-10 * abs(shift)) * (attempt + 1)
            continue
        d = lu.U.diagonal()
        if not np.all(np.isfinite(d)) or np.any(d == 0):
            shift += max(1e-10, 1e-10 * abs(shift)) * (attempt + 1)
            continue
        perm_ok = (np.array_equal(lu.perm_r, lu.perm_c)
                   or np.array_equal(lu.perm_r[lu.perm_c], np.arange(n)))
        imag_ok = np.abs(d.imag).max() <= 1e-6 * np.abs(d.real).max()
        return int(np.sum(d.real < 0)), bool(perm_ok and imag_ok)
    return 0, False


def dense_spectrum(op):
    """Full spectral decomposition through a dense Hermitian solve."""
    if op.n > DENSE_GUARD:
        raise DenseSizeError(f"dimension {op.n} exceeds the dense guard "
                             f"{DENSE_GUARD}")
    if not op.hermitian:
        raise NotHermitianError("dense oracle requires the hermitian flag")
    w, u = sla.eigh(op.matrix.toarray())
    return _sorted_slice(op, w, u, CERTIFIED, requested=op.n)


def lowest_eigs(op, m, tol=None, seed=0, maxiter=None):
    """m lowest eigenpairs by shift-invert Krylov iteration.

    The shift sits below the Gershgorin lower bound, so the factorized
    operator is definite and the iteration targets the bottom of the
    spectrum.  Certificate is upgraded to certified when an inertia count
    confirms that exactly m eigenvalues lie below the largest one returned.
    """
    m = int(m)
    if not op.hermitian:
        raise NotHermitianError("lowest_eigs requires the hermitian flag")
    if m < 1 or m >= op.n:
        raise WindowError(f"need 1 <= m < N, got m = {m}, N = {op.n}")
    if tol is None:
        tol = default_tol(op)

    lo, hi = gershgorin_interval(op)
    if op.n <= max(2 * m + 16, 64) and op.n <= DENSE_GUARD:
        # tiny instance: Krylov subspace would exhaust the space anyway
        full = dense_spectrum(op)
        out = full.select(np.arange(m))
        out.requested = m
        out.tol = tol
        return out

    sigma = lo - max(1e-3 * (hi - lo), 1e-6)
    v0 = _start_vector(op.n, seed)
    try:
        w, u = spla.eigsh(op.matrix, k=m, sigma=sigma, which="LM", v0=v0,
                          maxiter=maxiter, tol=0)
    except spla.ArpackNoConvergence as exc:
        partial = None
        if exc.eigenvalues is not None and exc.eigenvalues.size:
            partial = _sorted_slice(op, exc.eigenvalues, exc.eigenvectors,
                                    HEURISTIC, requested=m, tol=tol)
        raise ConvergenceError(f"Krylov iteration did not converge for "
                               f"m = {m}", partial=partial) from exc

    out = _sorted_slice(op, w, u, HEURISTIC, requested=m, tol=tol)
    bad = out.residuals > tol
    if bad.any():
        raise ConvergenceError(
            f"{int(bad.sum())} residuals exceed tol = {tol:.3g} "
            f"(worst {out.residuals.max():.3g})", partial=out)
    probe = out.values[-1] + max(10 * tol, 1e-10 * max(1.0, abs(out.values[-1])))
    count, trusted = count_below(op, probe)
    if trusted and count == m:
        out.certificate = CERTIFIED
    return out


def window_eigs(op, window, tol=None, seed=0, use_folded=False, maxiter=None):
    """All eigenpairs inside [alpha, beta] by shift-invert at the midpoint.

    Inertia counts at the two endpoints determine how many eigenvalues the
    window must hold; the slice is certified when exactly that many are
    found.  Factorization breakdown at the shift triggers up to three jitter
    retries.  The folded-spectrum fallback avoids factorization entirely but
    is always heuristic.
    """
    alpha, beta = float(window[0]), float(window[1])
    if not alpha < beta:
        raise WindowError(f"window [{alpha}, {beta}] is empty")
    if not op.hermitian:
        raise NotHermitianError("window_eigs requires the hermitian flag")
    if tol is None:
        tol = default_tol(op)

    if use_folded:
        return _folded_window(op, alpha, beta, tol, seed, maxiter)

    c_lo, ok_lo = count_below(op, alpha)
    c_hi, ok_hi = count_below(op, beta)
    expected = c_hi - c_lo if (ok_lo and ok_hi) else None

    if expected == 0:
        return SpectrumSlice(values=np.empty(0), vectors=np.empty((op.n, 0)),
                             residuals=np.empty(0), certificate=CERTIFIED,
                             window=(alpha, beta), tol=tol)

    guess = expected if expected is not None else 8
    k = min(max(guess + 8, 8), op.n - 2)
    sigma = 0.5 * (alpha + beta)
    v0 = _start_vector(op.n, seed)

    while True:
        w = u = None
        shift = sigma
        for attempt in range(3):
            try:
                w, u = spla.eigsh(op.matrix, k=k, sigma=shift, which="LM",
                                  v0=v0, maxiter=maxiter, tol=0)
                break
            except spla.ArpackNoConvergence as exc:
                partial = None
                if exc.eigenvalues is not None and exc.eigenvalues.size:
                    partial = _sorted_slice(op, exc.eigenvalues,
                                            exc.eigenvectors, HEURISTIC,
                                            window=(alpha, beta), tol=tol)
                raise ConvergenceError("window iteration did not converge",
                                       partial=partial) from exc
            except RuntimeError:
                # singular or failed factorization at the shift
                shift = sigma + (attempt + 1) * 1e-3 * (beta - alpha)
        if w is None:
            raise ConvergenceError(
                f"factorization failed at shift {sigma:.6g} after jitters")

        full = _sorted_slice(op, w, u, HEURISTIC, window=(alpha, beta), tol=tol)
        inside = (full.values >= alpha) & (full.values <= beta)
        got = int(inside.sum())
        if expected is not None and got < expected and k < op.n - 2:
            k = min(2 * k + 8, op.n - 2)
            continue
        out = full.select(np.flatnonzero(inside))
        bad = out.residuals > tol
        if bad.any():
            raise ConvergenceError(
                f"{int(bad.sum())} window residuals exceed tol = {tol:.3g}",
                partial=out)
        if expected is not None and got == expected:
            out.certificate = CERTIFIED
        return out


def _folded_window(op, alpha, beta, tol, seed, maxiter):
    sigma = 0.5 * (alpha + beta)
    mat = op.matrix

    def folded(x):
        y = mat @ x - sigma * x
        return mat @ y - sigma * y

    lin = spla.LinearOperator(shape=mat.shape, matvec=folded, dtype=complex)
    k = min(32, op.n - 2)
    v0 = _start_vector(op.n, seed)
    try:
        w, u = spla.eigsh(lin, k=k, which="SA", v0=v0, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("folded-spectrum iteration did not converge") \
            from exc
    # eigenvalues of the folded operator only locate |lambda - sigma|;
    # recover lambda from Rayleigh quotients
    lam = np.real(np.einsum("ij,ij->j", u.conj(), mat @ u))
    inside = (lam >= alpha) & (lam <= beta)
    out = _sorted_slice(op, lam[inside], u[:, inside], HEURISTIC,
                        window=(alpha, beta), tol=tol)
    bad = out.residuals > tol
    if bad.any():
        out = out.select(np.flatnonzero(~bad))
    return out


def write_slice(sl, path):
    """Binary eigenvector dump (little-endian, per-pair records)."""
    n = sl.vectors.shape[0]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQQ", BSEV_MAGIC, BSEV_VERSION, n, len(sl)))
        for i in range(len(sl)):
            fh.write(struct.pack("<dd", float(sl.values[i]),
                                 float(sl.residuals[i])))
            interleaved = np.empty(2 * n, dtype="<f8")
            interleaved[0::2] = sl.vectors[:, i].real
            interleaved[1::2] = sl.vectors[:, i].imag
            fh.write(interleaved.tobytes())


def read_slice(path):
    """Read a BSEV dump; certificates are not stored, so loads are heuristic."""
    with open(path, "rb") as fh:
        magic, version, n, count = struct.unpack("<4sIQQ", fh.read(24))
        if magic != BSEV_MAGIC:
            raise WindowError(f"bad magic {magic!r} in eigenvector dump")
        if version != BSEV_VERSION:
            raise WindowError(f"unsupported eigenvector dump version {version}")
        values = np.empty(count)
        residuals = np.empty(count)
        vectors = np.empty((n, count), dtype=complex)
        for i in range(count):
            values[i], residuals[i] = struct.unpack("<dd", fh.read(16))
            raw = np.frombuffer(fh.read(16 * n), dtype="<f8")
            vectors[:, i] = raw[0::2] + 1j * raw[1::2]
    return SpectrumSlice(values=values, vectors=vectors, residuals=residuals,
                         certificate=HEURISTIC)
