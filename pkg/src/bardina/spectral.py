"""Spectral representation of periodic velocity fields on [-pi, pi]^3.

Fields are trigonometric polynomials u(x) = sum_k u_hat(k) exp(i k.x) with
integer wavenumbers k. Coefficients are stored in the half-spectrum (rfft)
layout: shape (3, n, n, n//2 + 1), complex128, with the kz < 0 half implied
by Hermitian symmetry. Nyquist slots (any |k_i| = n/2) are kept identically
zero so that every stored mode has an exact conjugate partner.

All quadratic products are evaluated pointwise on a padded collocation grid
(2/3 rule) so the retained coefficients are the exact Galerkin truncation,
free of aliasing.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

VOLUME = (2.0 * np.pi) ** 3   # measure of the periodic box
MIN_PAD_FACTOR = 1.5          # smallest padding that keeps retained quadratic modes alias-free
DIV_TOL = 1e-12               # relative divergence tolerance accepted by validate()

_NORM_KINDS = ("l2", "h_alpha", "h_minus3", "linf")


class ResolutionMismatchError(ValueError):
    """Raised when two fields on different grids are combined."""


@functools.lru_cache(maxsize=None)
def wavenumbers(n: int):
    """Integer wavenumber meshes (kx, ky, kz, |k|^2) in rfft layout for an n^3 grid.

    Arrays are float64, shape (n, n, n//2 + 1), read-only and cached per n.
    """
    _check_resolution(n)
    k = np.fft.fftfreq(n, 1.0 / n).astype(np.float64)
    kz_line = np.arange(n // 2 + 1, dtype=np.float64)
    kx, ky, kz = np.meshgrid(k, k, kz_line, indexing="ij", sparse=False)
    k2 = kx * kx + ky * ky + kz * kz
    for a in (kx, ky, kz, k2):
        a.setflags(write=False)
    return kx, ky, kz, k2


@functools.lru_cache(maxsize=None)
def _fold_weights(n: int) -> np.ndarray:
    # Multiplicity of each kz slot when summing over the full spectrum:
    # interior kz counts twice (conjugate partner), kz = 0 and the (empty)
    # Nyquist slot count once.
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    w.setflags(write=False)
    return w


def _check_resolution(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 4 or n % 2:
        raise ValueError(f"grid resolution must be an even integer >= 4, got {n!r}")


@dataclass
class SpectralField:
    """Divergence-free velocity field stored as rfft-layout coefficients.

    coeffs[c, i, j, l] multiplies exp(i k.x) for component c at
    k = (fftfreq(n)[i], fftfreq(n)[j], l). Only kz >= 0 is stored.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 4 or c.shape[0] != 3:
            raise ValueError(f"expected coefficient shape (3, n, n, n//2+1), got {c.shape}")
        n = c.shape[1]
        _check_resolution(n)
        if c.shape != (3, n, n, n // 2 + 1):
            raise ValueError(f"inconsistent coefficient shape {c.shape}")
        if c.dtype != np.complex128:
            c = c.astype(np.complex128)
        self.coeffs = c

    @property
    def n(self) -> int:
        """Grid resolution per axis."""
        return self.coeffs.shape[1]

    @classmethod
    def zeros(cls, n: int) -> "SpectralField":
        _check_resolution(n)
        return cls(np.zeros((3, n, n, n // 2 + 1), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy())

    def full_coeffs(self) -> np.ndarray:
        """Expand to the full (3, n, n, n) c2c spectrum (numpy fft layout)."""
        n = self.n
        full = np.zeros((3, n, n, n), dtype=np.complex128)
        full[..., : n // 2 + 1] = self.coeffs
        flip = (-np.arange(n)) % n
        rev = self.coeffs[:, flip][:, :, flip]          # coefficients at (-kx, -ky, kz)
        full[..., n // 2 + 1:] = np.conj(rev[..., 1: n // 2][..., ::-1])
        return full

    @classmethod
    def from_full(cls, full: np.ndarray) -> "SpectralField":
        """Fold a Hermitian-symmetric full spectrum back to rfft layout."""
        full = np.asarray(full, dtype=np.complex128)
        n = full.shape[1]
        return cls(full[..., : n // 2 + 1].copy())

    def validate(self, div_tol: float = DIV_TOL) -> None:
        """Raise ValueError unless coefficients are finite, conjugate-symmetric,
        Nyquist-free and divergence-free to within div_tol (relative)."""
        c = self.coeffs
        n = self.n
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        ny = n // 2
        if np.any(c[:, ny] != 0) or np.any(c[:, :, ny] != 0) or np.any(c[..., -1] != 0):
            raise ValueError("Nyquist modes must be identically zero")
        scale = np.max(np.abs(c)) if c.size else 0.0
        flip = (-np.arange(n)) % n
        for plane in (c[..., 0],):
            mirrored = np.conj(plane[:, flip][:, :, flip])
            if np.max(np.abs(plane - mirrored)) > 1e-13 * (1.0 + scale):
                raise ValueError("kz = 0 plane is not conjugate-symmetric (field not real)")
        kx, ky, kz, k2 = wavenumbers(n)
        div = kx * c[0] + ky * c[1] + kz * c[2]
        mag = np.sqrt(np.abs(c[0]) ** 2 + np.abs(c[1]) ** 2 + np.abs(c[2]) ** 2)
        bound = div_tol * (np.sqrt(k2) * mag + 1e-30)
        worst = np.max(np.abs(div) - bound)
        if worst > 0:
            raise ValueError(f"divergence exceeds tolerance by {worst:.3e}")


@dataclass
class PhysicalField:
    """Velocity samples on the uniform collocation grid anchored at -pi.

    values[c, i, j, l] is component c at x = (-pi + 2*pi*i/m, ..., -pi + 2*pi*l/m).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 4 or v.shape[0] != 3 or len(set(v.shape[1:])) != 1:
            raise ValueError(f"expected value shape (3, m, m, m), got {v.shape}")
        self.values = v

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def axis_coordinates(self) -> np.ndarray:
        m = self.m
        return -np.pi + 2.0 * np.pi * np.arange(m) / m


def hermitian_symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Make the kz = 0 plane conjugate-symmetric (in place) and return coeffs."""
    n = coeffs.shape[1]
    flip = (-np.arange(n)) % n
    plane = coeffs[..., 0]
    coeffs[..., 0] = 0.5 * (plane + np.conj(plane[:, flip][:, :, flip]))
    return coeffs


def zero_nyquist(coeffs: np.ndarray) -> np.ndarray:
    """Zero all modes with any |k_i| = n/2 (in place) and return coeffs."""
    n = coeffs.shape[1]
    ny = n // 2
    coeffs[:, ny] = 0.0
    coeffs[:, :, ny] = 0.0
    coeffs[..., -1] = 0.0
    return coeffs


def leray_project(field) -> SpectralField:
    """Project onto divergence-free fields: u_hat -= k (k.u_hat) / |k|^2, k != 0.

    Accepts a SpectralField or a raw rfft-layout coefficient array; the mean
    mode is untouched and Nyquist slots are zeroed.
    """
    c = field.coeffs if isinstance(field, SpectralField) else np.asarray(field, dtype=np.complex128)
    out = c.copy()
    n = out.shape[1]
    kx, ky, kz, k2 = wavenumbers(n)
    _project_raw(out, kx, ky, kz, k2)
    zero_nyquist(out)
    return SpectralField(out)


def _project_raw(c: np.ndarray, kx, ky, kz, k2) -> None:
    # In-place Leray projection of a raw coefficient array; k = 0 untouched.
    denom = np.where(k2 > 0, k2, 1.0)
    kd = (kx * c[0] + ky * c[1] + kz * c[2]) / denom
    c[0] -= kx * kd
    c[1] -= ky * kd
    c[2] -= kz * kd


def helmholtz_filter(field: SpectralField, alpha: float) -> SpectralField:
    """Apply (1 - alpha Laplacian)^{-1}: multiply each mode by 1/(1 + alpha|k|^2)."""
    _check_alpha(alpha)
    _, _, _, k2 = wavenumbers(field.n)
    return SpectralField(field.coeffs / (1.0 + alpha * k2))


def helmholtz_sharpen(field: SpectralField, alpha: float) -> SpectralField:
    """Apply (1 - alpha Laplacian): multiply each mode by (1 + alpha|k|^2)."""
    _check_alpha(alpha)
    _, _, _, k2 = wavenumbers(field.n)
    return SpectralField(field.coeffs * (1.0 + alpha * k2))


def _check_alpha(alpha: float) -> None:
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be a finite nonnegative real, got {alpha!r}")


@functools.lru_cache(maxsize=None)
def padded_size(n: int, pad_factor: float = MIN_PAD_FACTOR) -> int:
    """Smallest fast even FFT size >= pad_factor * n."""
    m = int(np.ceil(pad_factor * n - 1e-9))
    m = max(m, n)
    m = _fft.next_fast_len(m, real=True)
    while m % 2:
        m = _fft.next_fast_len(m + 1, real=True)
    return m


@functools.lru_cache(maxsize=None)
def _pad_slices(n: int, m: int):
    # Matching index ranges for fft-layout rows on a size-n and a size-m >= n
    # grid. Nyquist row (index n//2) of the small grid is excluded.
    half = n // 2
    small = (slice(0, half), slice(half + 1, n))
    big = (slice(0, half), slice(m - half + 1, m))
    return small, big


def pad_embed(coeffs: np.ndarray, m: int, out: np.ndarray | None = None) -> np.ndarray:
    """Embed rfft-layout coefficients of size n into a zero-padded size-m layout."""
    b, n = coeffs.shape[0], coeffs.shape[1]
    if out is None:
        out = np.zeros((b, m, m, m // 2 + 1), dtype=np.complex128)
    else:
        out[...] = 0.0
    small, big = _pad_slices(n, m)
    zhalf = slice(0, n // 2)
    for a in range(2):
        for c in range(2):
            out[:, big[a], big[c], zhalf] = coeffs[:, small[a], small[c], zhalf]
    return out


def truncate(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Restrict size-m rfft-layout coefficients to the size-n grid (Nyquist zero)."""
    b, m = coeffs.shape[0], coeffs.shape[1]
    out = np.zeros((b, n, n, n // 2 + 1), dtype=np.complex128)
    small, big = _pad_slices(n, m)
    zhalf = slice(0, n // 2)
    for a in range(2):
        for c in range(2):
            out[:, small[a], small[c], zhalf] = coeffs[:, big[a], big[c], zhalf]
    return out


def _grid_values(coeffs: np.ndarray, m: int) -> np.ndarray:
    # Collocation samples of the trig polynomial on the m^3 grid anchored at 0.
    return _fft.irfftn(coeffs, s=(m, m, m), axes=(-3, -2, -1)) * float(m) ** 3


def _grid_coeffs(values: np.ndarray) -> np.ndarray:
    m = values.shape[-1]
    return _fft.rfftn(values, axes=(-3, -2, -1)) / float(m) ** 3


def to_physical(field: SpectralField, m: int | None = None) -> PhysicalField:
    """Evaluate on the m^3 collocation grid anchored at -pi (m defaults to n)."""
    n = field.n
    m = n if m is None else int(m)
    if m < n:
        raise ValueError(f"target grid {m} too coarse for resolution {n}")
    c = field.coeffs if m == n else pad_embed(field.coeffs, m)
    vals = _grid_values(c, m)
    # Shifting samples by half a period re-anchors the grid at -pi exactly.
    vals = np.roll(vals, (m // 2, m // 2, m // 2), axis=(1, 2, 3))
    return PhysicalField(vals)


def from_physical(phys: PhysicalField, n: int | None = None) -> SpectralField:
    """Recover coefficients from collocation samples; truncates to resolution n."""
    m = phys.m
    n = m if n is None else int(n)
    if n > m:
        raise ValueError(f"cannot infer resolution {n} from a {m}^3 grid")
    vals = np.roll(phys.values, (-(m // 2),) * 3, axis=(1, 2, 3))
    c = _grid_coeffs(vals)
    c = truncate(c, n) if n < m else c
    zero_nyquist(c)
    hermitian_symmetrize(c)
    return SpectralField(c)


def advect(field: SpectralField, pad_factor: float = MIN_PAD_FACTOR, exact: bool = True,
           workspace: np.ndarray | None = None) -> SpectralField:
    """Leray-projected advection term Pi((u.grad) u), exact Galerkin truncation.

    Evaluated in rotational form: (curl u) x u equals (u.grad)u minus a
    gradient, and the projection annihilates gradients mode by mode, so the
    result is identical to projecting the convective form while costing 9
    transforms instead of 15. Products are formed pointwise on a grid padded
    by pad_factor (>= 1.5 keeps every retained mode alias-free).
    """
    if exact and pad_factor < MIN_PAD_FACTOR:
        raise ValueError(f"pad_factor {pad_factor} < {MIN_PAD_FACTOR} cannot give exact products")
    n = field.n
    m = padded_size(n, pad_factor)
    kx, ky, kz, _ = wavenumbers(n)
    c = field.coeffs
    stack = np.empty((6,) + c.shape[1:], dtype=np.complex128)
    stack[:3] = c
    stack[3] = 1j * (ky * c[2] - kz * c[1])   # curl components
    stack[4] = 1j * (kz * c[0] - kx * c[2])
    stack[5] = 1j * (kx * c[1] - ky * c[0])
    emb = pad_embed(stack, m, out=workspace)
    vals = _grid_values(emb, m)
    u, w = vals[:3], vals[3:]
    cross = np.empty((3, m, m, m), dtype=np.float64)
    cross[0] = w[1] * u[2] - w[2] * u[1]
    cross[1] = w[2] * u[0] - w[0] * u[2]
    cross[2] = w[0] * u[1] - w[1] * u[0]
    out = truncate(_grid_coeffs(cross), n)
    kxn, kyn, kzn, k2n = wavenumbers(n)
    _project_raw(out, kxn, kyn, kzn, k2n)
    # The convective term has zero mean (periodicity); discard rounding dust.
    out[:, 0, 0, 0] = 0.0
    return SpectralField(out)


def norm_sq(field: SpectralField, kind: str, alpha: float = 0.0) -> float:
    """Squared norm; see norm() for the available kinds."""
    if kind == "linf":
        raise ValueError("linf is not induced by an inner product; use norm()")
    weight = _norm_weight(field.n, kind, alpha)
    c = field.coeffs
    mag2 = (c.real ** 2 + c.imag ** 2).sum(axis=0)
    w = _fold_weights(field.n)
    return float(VOLUME * np.sum(mag2 * weight * w))


def _norm_weight(n: int, kind: str, alpha: float):
    _, _, _, k2 = wavenumbers(n)
    if kind == "l2":
        return 1.0
    if kind == "h_alpha":
        _check_alpha(alpha)
        return 1.0 + alpha * k2
    if kind == "h_minus3":
        return (1.0 + k2) ** -3
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {_NORM_KINDS}")


def norm(field: SpectralField, kind: str = "l2", alpha: float = 0.0) -> float:
    """Norm of the field.

    kind: "l2", "h_alpha" (weight 1 + alpha|k|^2), "h_minus3" (weight
    (1 + |k|^2)^-3), or "linf" (max pointwise speed on the collocation grid).
    """
    if kind == "linf":
        v = to_physical(field).values
        speed2 = v[0] ** 2 + v[1] ** 2 + v[2] ** 2
        return float(np.sqrt(np.max(speed2)))
    return float(np.sqrt(max(norm_sq(field, kind, alpha), 0.0)))


def inner(u: SpectralField, v: SpectralField, kind: str = "l2", alpha: float = 0.0) -> float:
    """Real inner product matching norm(): <u, v> with the same mode weights."""
    if u.n != v.n:
        raise ResolutionMismatchError(f"resolutions differ: {u.n} vs {v.n}")
    weight = _norm_weight(u.n, kind, alpha)
    w = _fold_weights(u.n)
    prod = np.real(u.coeffs * np.conj(v.coeffs)).sum(axis=0)
    return float(VOLUME * np.sum(prod * weight * w))


def grad_norm_sq(field: SpectralField) -> float:
    """Squared L2 norm of the velocity gradient, sum_k |k|^2 |u_hat|^2 * volume."""
    _, _, _, k2 = wavenumbers(field.n)
    c = field.coeffs
    mag2 = (c.real ** 2 + c.imag ** 2).sum(axis=0)
    return float(VOLUME * np.sum(mag2 * k2 * _fold_weights(field.n)))


def _strain_eigs(field: SpectralField, m: int | None = None):
    # Pointwise eigenvalues of the symmetric gradient on the (padded) grid.
    n = field.n
    m = n if m is None else m
    kx, ky, kz, _ = wavenumbers(n)
    c = field.coeffs
    grads = np.empty((9,) + c.shape[1:], dtype=np.complex128)
    for i in range(3):
        grads[3 * i + 0] = 1j * kx * c[i]
        grads[3 * i + 1] = 1j * ky * c[i]
        grads[3 * i + 2] = 1j * kz * c[i]
    emb = grads if m == n else pad_embed(grads, m)
    g = _grid_values(emb, m).reshape(3, 3, -1)
    s = 0.5 * (g + g.transpose(1, 0, 2)).transpose(2, 0, 1)
    return np.linalg.eigvalsh(s)


def strain_sup(field: SpectralField) -> float:
    """sup over the grid of the largest compression rate, max(-lambda_min(S), 0)
    with S the symmetric part of grad u."""
    eigs = _strain_eigs(field)
    return float(max(-eigs[:, 0].min(), 0.0))


def strain_radius(field: SpectralField) -> float:
    """sup over the grid of the spectral radius of the symmetric gradient."""
    eigs = _strain_eigs(field)
    return float(max(eigs[:, -1].max(), -eigs[:, 0].min(), 0.0))


def spectral_tail_ratio(field: SpectralField) -> float:
    """Fraction of L2 energy carried by modes with max_i |k_i| > n/4.

    A resolved (spectrally converged) field has a tiny tail; values near 1
    indicate energy piled against the truncation limit.
    """
    n = field.n
    k = np.abs(np.fft.fftfreq(n, 1.0 / n))
    kzl = np.arange(n // 2 + 1, dtype=np.float64)
    kinf = np.maximum(np.maximum(k[:, None, None], k[None, :, None]), kzl[None, None, :])
    c = field.coeffs
    mag2 = (c.real ** 2 + c.imag ** 2).sum(axis=0) * _fold_weights(n)
    total = float(np.sum(mag2))
    if total == 0.0:
        return 0.0
    return float(np.sum(mag2[kinf > n / 4]) / total)


def random_divfree(n: int, kmax: int, amplitude: float, seed: int) -> SpectralField:
    """Random smooth divergence-free field: Gaussian modes with 0 < |k| <= kmax,
    projected, symmetrized, and rescaled to the requested L2 norm."""
    _check_resolution(n)
    if kmax < 1 or kmax > n // 2 - 1:
        raise ValueError(f"kmax must lie in [1, n/2 - 1], got {kmax}")
    rng = np.random.default_rng(seed)
    shape = (3, n, n, n // 2 + 1)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    _, _, _, k2 = wavenumbers(n)
    c[:, k2 > kmax * kmax] = 0.0
    c[:, 0, 0, 0] = 0.0
    zero_nyquist(c)
    hermitian_symmetrize(c)
    field = leray_project(c)
    scale = norm(field, "l2")
    if scale == 0.0:
        raise ValueError("random field degenerated to zero; widen the mode band")
    return SpectralField(field.coeffs * (amplitude / scale))
