"""Finite-dimensional Gabor frames on C^L.

Conventions used throughout the package:

* cyclic time shift     ``(T^k c)[p] = c[(p - k) mod L]``
* modulation            ``(M^n c)[p] = exp(2*pi*i*n*p/L) * c[p]``
* frame atom            ``g_{(k,n)} = M^n T^k c``
* atom order            the index set I lists (k, n) with n fastest:
                        (0,0), (0,1), ..., (0,L-1), (1,0), ..., (L-1,L-1);
                        atom (k, n) sits in column k*L + n.

The shifts satisfy ``T^k M^n = exp(-2*pi*i*k*n/L) M^n T^k``.  Every
downstream vectorization / Kronecker choice in :mod:`stochop.tensor` keys
off this single ordering, so it must not change.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .errors import BudgetExceeded

#: a singular value / determinant below RANK_RTOL times the natural scale
#: counts as an exact zero (separates algebraic zeros from float noise at
#: desk-scale L <= 7)
RANK_RTOL = 1e-10

_ATOL = 1e-12


class TorusIndex(NamedTuple):
    """Point of the index torus Z_L x Z_L: k = time shift, n = modulation."""

    k: int
    n: int


def torus_indices(L: int) -> list[TorusIndex]:
    """The canonical index set I, n fastest within k blocks."""
    return [TorusIndex(k, n) for k in range(L) for n in range(L)]


def atom_column(lam: TorusIndex, L: int) -> int:
    """Column position of atom lam in a frame matrix (n fastest)."""
    return (lam[0] % L) * L + (lam[1] % L)


@dataclass(frozen=True)
class Window:
    """Seed vector c in C^L generating a Gabor frame."""

    L: int
    entries: np.ndarray
    unimodular: bool = False

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "entries", entries)
        if self.L < 2:
            raise ValueError(f"window dimension must be >= 2, got L={self.L}")
        if entries.shape != (self.L,):
            raise ValueError(f"expected {self.L} entries, got shape {entries.shape}")
        if not np.all(np.isfinite(entries.view(float))):
            raise ValueError("window entries must be finite")
        if self.unimodular and np.max(np.abs(np.abs(entries) - 1.0)) > _ATOL:
            raise ValueError("unimodular window has entries off the unit circle")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def allclose(self, other: "Window", atol: float = _ATOL) -> bool:
        return self.L == other.L and np.allclose(
            self.entries, other.entries, rtol=0.0, atol=atol * max(1.0, self.norm)
        )


def window(entries: Iterable[complex], unimodular: bool = False) -> Window:
    arr = np.asarray(list(entries), dtype=complex)
    return Window(L=arr.size, entries=arr, unimodular=unimodular)


def translate(c: Window, k: int) -> Window:
    """Cyclic time shift: output[p] = c[(p - k) mod L]."""
    return Window(c.L, np.roll(c.entries, k), c.unimodular)


def modulate(c: Window, n: int) -> Window:
    """Pointwise modulation by the n-th character of Z_L."""
    phase = np.exp(2j * np.pi * n * np.arange(c.L) / c.L)
    return Window(c.L, phase * c.entries, False)


def fourier_window(c: Window) -> Window:
    """Unnormalized DFT of the window, (Fc)[p] = sum_r c[r] e^{-2 pi i r p / L}."""
    return Window(c.L, np.fft.fft(c.entries), False)


def inverse_fourier_window(c: Window) -> Window:
    return Window(c.L, np.fft.ifft(c.entries), False)


def conjugate_window(c: Window) -> Window:
    return Window(c.L, np.conj(c.entries), c.unimodular)


def commutation_check(k: int, n: int, c: Window) -> bool:
    """True iff T^k M^n c == exp(-2 pi i k n / L) M^n T^k c entrywise."""
    lhs = translate(modulate(c, n), k).entries
    rhs = np.exp(-2j * np.pi * k * n / c.L) * modulate(translate(c, k), n).entries
    return bool(np.max(np.abs(lhs - rhs)) <= _ATOL * max(1.0, c.norm))


@dataclass(frozen=True)
class GaborFrame:
    """All L^2 time-frequency shifts of a window, columns in I order."""

    window: Window
    matrix: np.ndarray
    index_order: tuple = field(repr=False, default=())

    @property
    def L(self) -> int:
        return self.window.L

    def atom(self, lam) -> np.ndarray:
        """Frame column for torus index lam (indices reduced mod L)."""
        return self.matrix[:, atom_column(TorusIndex(*lam), self.L)]


def build_frame(c: Window) -> GaborFrame:
    """Assemble the L x L^2 Gabor matrix G = [M^n T^k c]."""
    L = c.L
    p = np.arange(L)
    phases = np.exp(2j * np.pi * np.outer(np.arange(L), p) / L)  # [n, p]
    cols = np.empty((L, L * L), dtype=complex)
    for k in range(L):
        shifted = np.roll(c.entries, k)
        cols[:, k * L : (k + 1) * L] = (phases * shifted[None, :]).T
    return GaborFrame(window=c, matrix=cols, index_order=tuple(torus_indices(L)))


@dataclass(frozen=True)
class HaarReport:
    all_independent: bool
    min_abs_det: float
    subsets_tested: int
    mode: str
    #: first few dependent subsets found, as tuples of TorusIndex
    failures: tuple = ()


def haar_check(
    c: Window,
    mode: str = "exhaustive",
    trials: int = 0,
    seed: Optional[int] = None,
    budget: int = 200_000,
    tol: float = RANK_RTOL,
) -> HaarReport:
    """Test linear independence of L-element column subsets of the frame.

    A subset counts as dependent when |det| <= tol * (product of column
    norms).  Exhaustive mode enumerates all C(L^2, L) subsets and raises
    BudgetExceeded beyond `budget`; sampled mode draws `trials` random
    subsets from the given seed.
    """
    L = c.L
    G = build_frame(c).matrix
    idx = torus_indices(L)
    if mode == "exhaustive":
        n_subsets = math.comb(L * L, L)
        if n_subsets > budget:
            raise BudgetExceeded(
                f"C({L * L},{L}) = {n_subsets} exceeds budget {budget}; use sampled mode"
            )
        subsets = np.array(list(itertools.combinations(range(L * L), L)))
    elif mode == "sampled":
        if trials < 1:
            raise ValueError("sampled mode needs trials >= 1")
        rng = np.random.default_rng(seed)
        subsets = np.array(
            [rng.choice(L * L, size=L, replace=False) for _ in range(trials)]
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")

    mats = G[:, subsets].transpose(1, 0, 2)  # [subset, row, col]
    dets = np.linalg.det(mats)
    col_norms = np.linalg.norm(G, axis=0)
    scales = np.prod(col_norms[subsets], axis=1)
    dependent = np.abs(dets) <= tol * scales
    failures = tuple(
        tuple(idx[j] for j in subsets[i]) for i in np.nonzero(dependent)[0][:8]
    )
    return HaarReport(
        all_independent=not dependent.any(),
        min_abs_det=float(np.min(np.abs(dets))),
        subsets_tested=int(len(subsets)),
        mode=mode,
        failures=failures,
    )


def stft_self(c: Window) -> np.ndarray:
    """Short-time Fourier transform of the window against itself.

    output[p, q] = sum_r exp(-2 pi i p r / L) c[r] conj(c[r - q])
                 = <c, M^p T^q c>.
    """
    W = np.stack(
        [c.entries * np.conj(np.roll(c.entries, q)) for q in range(c.L)], axis=1
    )
    return np.fft.fft(W, axis=0)


def random_window(L: int, unimodular: bool = False, seed: Optional[int] = None) -> Window:
    """Draw a window with i.i.d. entries; deterministic for a fixed seed.

    Gaussian mode uses circular complex normals with E|c_p|^2 = 1; the
    unimodular mode puts every entry on the unit circle.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    rng = np.random.default_rng(seed)
    if unimodular:
        entries = np.exp(2j * np.pi * rng.random(L))
    else:
        entries = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    return Window(L=L, entries=entries, unimodular=unimodular)


def window_to_json(c: Window) -> str:
    payload = {
        "L": c.L,
        "entries": [[float(z.real), float(z.imag)] for z in c.entries],
        "unimodular": bool(c.unimodular),
    }
    return json.dumps(payload, sort_keys=True)


def window_from_json(text: str) -> Window:
    data = json.loads(text)
    entries = np.array([complex(re, im) for re, im in data["entries"]])
    return Window(L=int(data["L"]), entries=entries, unimodular=bool(data["unimodular"]))
