"""Discretized stochastic channel simulator and identifier.

Grid conventions
----------------
A spreading field lives on [0, aL) x [0, bL) with ab = 1/L, split into
L x L boxes of size a x b, each subdivided M times per edge:

    t-node u = k*M + s   ->  t  = a * u / M      (box k, offset s)
    nu-node w = n*M + r  ->  nu = b * w / M      (box n, offset r)

The sounding signal is the L-periodic c-weighted delta train with spacing
a.  Responses are sampled at x = a*v/M for v in [0, L*M^2); on this grid
the response is exactly periodic with period a*L*M, so one period holds
everything and the Zak sum over M translates wraps around exactly.

The forward model is the Riemann-sum discretization

    f(x) = sum_k c_{k mod L} sum_{nu-grid} eta(x - a k, nu) e^{2 pi i nu x} (b/M),

and the non-normalized Zak transform / demixing

    Zak f(x, nu)   = sum_{m=0}^{M-1} f(x - a m L) e^{2 pi i a L m nu}
    Z_p(t, nu)     = b^{-1} e^{-2 pi i nu (t + a p)} Zak f(t + a p, nu)

recover, exactly on the grid (discrete Poisson summation leaves no
discretization error), the mixing identity

    Z(t, nu) = sum_{(k,n)} (M^n T^k c) eta_{k,n}(t, nu),
    eta_{k,n}(t, nu) = eta(t + a k, nu + b n) e^{2 pi i b n t}.

Everything downstream (patch solves, autocorrelation recovery, scattering
functions) is linear algebra per grid node on top of this identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    FormatError,
    InsufficientExtent,
    MetadataMismatch,
    NotLeftInvertible,
    ResidualTooLarge,
    SingularSubframe,
    SupportViolation,
    TrainTooShort,
    UnsynthesizablePattern,
)
from .gabor import GaborFrame, TorusIndex, Window, atom_column, build_frame
from .patterns import Pattern, correlation_graph, diagonal_pattern, validate_spd
from .tensor import rank_and_left_inverse, restricted_tensor_frame

_FLD_MAGIC = b"SOPFLD1"


@dataclass(frozen=True)
class GridSpec:
    """Box geometry: L x L boxes of size a x b (ab = 1/L), M cells per edge."""

    L: int
    a: float
    b: float
    M: int = 4

    def __post_init__(self):
        if self.L < 2 or self.M < 1:
            raise ValueError("require L >= 2 and M >= 1")
        if abs(self.a * self.b * self.L - 1.0) > 1e-12:
            raise ValueError(f"a*b*L = {self.a * self.b * self.L} != 1")

    @classmethod
    def square(cls, L: int, M: int = 4) -> "GridSpec":
        a = 1.0 / np.sqrt(L)
        return cls(L=L, a=a, b=1.0 / (a * L), M=M)

    @classmethod
    def from_a(cls, L: int, a: float, M: int = 4) -> "GridSpec":
        return cls(L=L, a=a, b=1.0 / (a * L), M=M)

    @property
    def nodes_per_axis(self) -> int:
        return self.L * self.M

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_axis**2

    @property
    def n_samples(self) -> int:
        return self.L * self.M * self.M

    @property
    def t_nodes(self) -> np.ndarray:
        return self.a * np.arange(self.nodes_per_axis) / self.M

    @property
    def nu_nodes(self) -> np.ndarray:
        return self.b * np.arange(self.nodes_per_axis) / self.M

    @property
    def x_samples(self) -> np.ndarray:
        return self.a * np.arange(self.n_samples) / self.M


@dataclass(frozen=True)
class SpreadingField:
    """Samples of one spreading function on the box grid.

    values[k, n, s, r] = eta(a(k + s/M), b(n + r/M)).
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)
        L, M = self.grid.L, self.grid.M
        if v.shape != (L, L, M, M):
            raise ValueError(f"values shape {v.shape} != {(L, L, M, M)}")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("field values must be finite")

    def as_tnu(self) -> np.ndarray:
        """2D view on (t-node, nu-node) axes, shape (LM, LM)."""
        L, M = self.grid.L, self.grid.M
        return self.values.transpose(0, 2, 1, 3).reshape(L * M, L * M)

    def box_support(self, atol: float = 0.0) -> list[TorusIndex]:
        mags = np.abs(self.values).max(axis=(2, 3))
        return [
            TorusIndex(int(k), int(n)) for k, n in np.argwhere(mags > atol)
        ]

    @classmethod
    def from_tnu(cls, grid: GridSpec, arr: np.ndarray) -> "SpreadingField":
        L, M = grid.L, grid.M
        v = np.asarray(arr, dtype=complex).reshape(L, M, L, M).transpose(0, 2, 1, 3)
        return cls(grid=grid, values=v)


def random_field(
    grid: GridSpec, boxes: Sequence, seed: Optional[int] = None
) -> SpreadingField:
    """Random complex values filling the listed boxes, zero elsewhere."""
    rng = np.random.default_rng(seed)
    L, M = grid.L, grid.M
    values = np.zeros((L, L, M, M), dtype=complex)
    for k, n in boxes:
        values[k, n] = (
            rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
        ) / np.sqrt(2)
    return SpreadingField(grid=grid, values=values)


# ---------------------------------------------------------------------------
# stochastic models


@dataclass(frozen=True)
class StochasticSpreadingModel:
    """Finite factor model: realizations eta = sum_j xi_j Phi_j.

    With i.i.d. standard circular Gaussian weights the autocorrelation is
    sum_j Phi_j (x) conj(Phi_j); on construction its box-level support is
    computed and required to stay inside the declared pattern.
    """

    grid: GridSpec
    factors: tuple
    pattern: Pattern

    def __post_init__(self):
        if not self.factors:
            raise ValueError("model needs at least one factor")
        for f in self.factors:
            if f.grid != self.grid:
                raise MetadataMismatch("factor grids disagree")
        if self.grid.L != self.pattern.L:
            raise MetadataMismatch("pattern dimension != grid dimension")
        support = self._box_autocorr_support()
        extra = support - self.pattern.pairs
        if extra:
            raise ValueError(
                f"factor autocorrelation leaks outside the declared pattern: {sorted(extra)[:4]}"
            )

    def _box_autocorr_support(self) -> frozenset:
        L, M = self.grid.L, self.grid.M
        R = self.autocorrelation()
        R6 = R.reshape(L, M, L, M, L, M, L, M)
        box_mag = np.abs(R6).max(axis=(1, 3, 5, 7))
        scale = box_mag.max()
        hits = np.argwhere(box_mag > 1e-12 * max(scale, 1.0))
        return frozenset(
            (TorusIndex(int(k), int(n)), TorusIndex(int(kp), int(npp)))
            for k, n, kp, npp in hits
        )

    def factor_matrix(self) -> np.ndarray:
        """Factors flattened over (t-node, nu-node), shape (J, LM*LM)."""
        return np.stack([f.as_tnu().reshape(-1) for f in self.factors])

    def autocorrelation(self) -> np.ndarray:
        """Exact R_eta on node pairs, shape (LM, LM, LM, LM)."""
        F = self.factor_matrix()
        R = F.T @ np.conj(F)
        na = self.grid.nodes_per_axis
        return R.reshape(na, na, na, na)

    def scattering(self) -> np.ndarray:
        """Diagonal slice C(t, nu) = R(t, nu; t, nu), shape (LM, LM)."""
        F = self.factor_matrix()
        na = self.grid.nodes_per_axis
        return np.sum(np.abs(F) ** 2, axis=0).reshape(na, na)


def synthesize_model(
    p: Pattern, grid: GridSpec, seed: Optional[int] = None, per_clique: int = 1
) -> StochasticSpreadingModel:
    """Factor model whose autocorrelation support is exactly the pattern.

    Each connected component of the correlation graph becomes per_clique
    random factors on its boxes, which requires every component to be a
    clique; otherwise the factor squares would cover uncorrelated pairs and
    the construction refuses (use clique_cover_model or the exact
    autocorrelation path instead).
    """
    if not validate_spd(p):
        raise ValueError("pattern fails SPD closure")
    vertices, adj = correlation_graph(p)
    seen: set = set()
    components: list[list] = []
    for v in sorted(vertices):
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        components.append(sorted(comp))
    for comp in components:
        missing = [
            (x, y)
            for i, x in enumerate(comp)
            for y in comp[i + 1 :]
            if y not in adj[x]
        ]
        if missing:
            raise UnsynthesizablePattern(
                f"component {comp} is not a clique (uncorrelated pair {missing[0]}); "
                "its factor square would leak outside the pattern — "
                "use clique_cover_model or the exact-autocorrelation path"
            )
    seeds = np.random.SeedSequence(seed).spawn(len(components) * per_clique)
    factors = []
    i = 0
    for comp in components:
        for _ in range(per_clique):
            factors.append(random_field(grid, comp, seed=seeds[i]))
            i += 1
    return StochasticSpreadingModel(grid=grid, factors=tuple(factors), pattern=p)


def clique_cover_model(
    p: Pattern, grid: GridSpec, seed: Optional[int] = None, per_clique: int = 1
) -> StochasticSpreadingModel:
    """Factor model for an arbitrary SPD pattern via its edge/vertex cover.

    One factor group per off-diagonal correlation (supported on that pair
    of boxes) plus one per isolated diagonal cell; the union of the induced
    squares is exactly the pattern.
    """
    if not validate_spd(p):
        raise ValueError("pattern fails SPD closure")
    vertices, adj = correlation_graph(p)
    groups: list[tuple] = [tuple(e) for e in p.edges]
    groups += [(v,) for v in sorted(vertices) if not adj[v]]
    seeds = np.random.SeedSequence(seed).spawn(len(groups) * per_clique)
    factors = []
    i = 0
    for g in groups:
        for _ in range(per_clique):
            factors.append(random_field(grid, g, seed=seeds[i]))
            i += 1
    return StochasticSpreadingModel(grid=grid, factors=tuple(factors), pattern=p)


def wssus_model(scattering: np.ndarray, grid: GridSpec) -> StochasticSpreadingModel:
    """Uncorrelated-scattering model: one indicator factor per grid node.

    The autocorrelation is diagonal at node level (the discrete 4D diagonal
    tube), supported on the always-permissible diagonal box pattern, so the
    2D spread may exceed 1 (up to all L^2 boxes, total area L).
    """
    C = np.asarray(scattering, dtype=float)
    na = grid.nodes_per_axis
    if C.shape != (na, na):
        raise ValueError(f"scattering shape {C.shape} != {(na, na)}")
    if np.any(C < 0):
        raise ValueError("scattering function must be nonnegative")
    factors = []
    for u, w in np.argwhere(C > 0):
        arr = np.zeros((na, na), dtype=complex)
        arr[u, w] = np.sqrt(C[u, w])
        factors.append(SpreadingField.from_tnu(grid, arr))
    return StochasticSpreadingModel(
        grid=grid, factors=tuple(factors), pattern=diagonal_pattern(grid.L)
    )


def sample_realization(
    model: StochasticSpreadingModel, seed: Optional[int], freeze_weights: bool = False
) -> SpreadingField:
    """One realization eta = sum_j xi_j Phi_j, deterministic per seed.

    freeze_weights forces xi = 1 (degenerate mode for deterministic tests).
    """
    J = len(model.factors)
    if freeze_weights:
        xi = np.ones(J, dtype=complex)
    else:
        rng = np.random.default_rng(seed)
        xi = (rng.standard_normal(J) + 1j * rng.standard_normal(J)) / np.sqrt(2)
    flat = xi @ model.factor_matrix()
    na = model.grid.nodes_per_axis
    return SpreadingField.from_tnu(model.grid, flat.reshape(na, na))


# ---------------------------------------------------------------------------
# sounding and response


@dataclass(frozen=True)
class DeltaTrain:
    """L-periodic weighted impulse train sum_k c_{k mod L} delta(x - a k)."""

    window: Window
    a: float
    k_start: int
    k_stop: int

    def __post_init__(self):
        if self.k_stop <= self.k_start:
            raise ValueError("empty impulse range")

    @classmethod
    def covering(cls, window: Window, grid: GridSpec) -> "DeltaTrain":
        """Smallest range reaching every sample in [0, aLM) from any box."""
        return cls(
            window=window, a=grid.a, k_start=-grid.L + 1, k_stop=grid.L * grid.M
        )

    def weight(self, k: int) -> complex:
        return complex(self.window.entries[k % self.window.L])


@dataclass(frozen=True)
class ResponseRecord:
    """One period of sampled channel output, x = a v / M, v in [0, L M^2)."""

    grid: GridSpec
    samples: np.ndarray
    train: DeltaTrain
    realization_seed: Optional[int] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", s)
        if s.shape != (self.grid.n_samples,):
            raise ValueError(
                f"expected {self.grid.n_samples} samples, got shape {s.shape}"
            )


def required_impulses(grid: GridSpec, t_boxes: Iterable[int]) -> set[int]:
    """Impulse indices whose shifted boxes intersect the sampling window."""
    t_boxes = set(t_boxes)
    return {
        j - kb for j in range(grid.nodes_per_axis) for kb in t_boxes
    }


def forward_operator(grid: GridSpec, train: DeltaTrain) -> np.ndarray:
    """Matrix sending a flattened field (t-node major) to response samples."""
    if abs(train.a - grid.a) > 1e-12:
        raise MetadataMismatch(f"train spacing {train.a} != grid spacing {grid.a}")
    L, M = grid.L, grid.M
    LM, NS = grid.nodes_per_axis, grid.n_samples
    v = np.arange(NS)
    w = np.arange(LM)
    E = np.exp(2j * np.pi * np.outer(v, w) / (L * M * M))  # e^{2 pi i nu_w x_v}
    c = train.window.entries
    F = np.zeros((NS, LM, LM), dtype=complex)
    for k in range(train.k_start, train.k_stop):
        u = v - k * M
        ok = (u >= 0) & (u < LM)
        if not ok.any():
            continue
        F[v[ok], u[ok], :] += c[k % L] * E[v[ok], :]
    return (grid.b / M) * F.reshape(NS, LM * LM)


def apply_channel(eta: SpreadingField, train: DeltaTrain) -> ResponseRecord:
    """Riemann-sum response of the channel with spreading function eta."""
    grid = eta.grid
    needed = required_impulses(grid, (kb for kb, _ in eta.box_support()))
    missing = {k for k in needed if not (train.k_start <= k < train.k_stop)}
    if missing:
        raise TrainTooShort(missing)
    samples = forward_operator(grid, train) @ eta.as_tnu().reshape(-1)
    return ResponseRecord(grid=grid, samples=samples, train=train)


def simulate_responses(
    model: StochasticSpreadingModel,
    train: DeltaTrain,
    n: int,
    seed: Optional[int],
    chunk: int = 1024,
) -> np.ndarray:
    """Responses of n independent realizations, shape (n, n_samples)."""
    grid = model.grid
    needed = required_impulses(grid, range(grid.L))
    missing = {k for k in needed if not (train.k_start <= k < train.k_stop)}
    if missing:
        raise TrainTooShort(missing)
    Fop = forward_operator(grid, train)
    Phi = model.factor_matrix()
    J = Phi.shape[0]
    rng = np.random.default_rng(seed)
    out = np.empty((n, grid.n_samples), dtype=complex)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        xi = (
            rng.standard_normal((hi - lo, J)) + 1j * rng.standard_normal((hi - lo, J))
        ) / np.sqrt(2)
        out[lo:hi] = (xi @ Phi) @ Fop.T
    return out


# ---------------------------------------------------------------------------
# Zak transform and demixing


def zak(record: ResponseRecord) -> np.ndarray:
    """Non-normalized Zak transform on one period, shape (LM, M).

    Z[v0, r] = sum_{m} f(x_{v0} + a m L) e^{-2 pi i m r / M}; the response
    is exactly a L M-periodic so the translate sum wraps around.
    """
    grid = record.grid
    M, LM = grid.M, grid.nodes_per_axis
    if record.samples.size != grid.n_samples:
        raise InsufficientExtent(
            f"need {grid.n_samples} samples covering {M} translates"
        )
    return np.fft.fft(record.samples.reshape(M, LM), axis=0).T


def zak_operator(grid: GridSpec) -> np.ndarray:
    """Matrix form of zak(): rows (v0, r) flattened, columns samples."""
    M, LM, NS = grid.M, grid.nodes_per_axis, grid.n_samples
    Z = np.zeros((LM * M, NS), dtype=complex)
    m = np.arange(M)
    for v0 in range(LM):
        for r in range(M):
            Z[v0 * M + r, v0 + m * LM] = np.exp(-2j * np.pi * m * r / M)
    return Z


def _demix_phases(grid: GridSpec) -> np.ndarray:
    """b^{-1} e^{-2 pi i nu (t + a p)} on the (v0, r) Zak grid."""
    M, LM = grid.M, grid.nodes_per_axis
    v0 = np.arange(LM)[:, None]
    r = np.arange(M)[None, :]
    return (1.0 / grid.b) * np.exp(-2j * np.pi * r * v0 / (grid.L * M * M))


def demix(zak_values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Per-node mixing vectors Z_p(t, nu), shape (L, M, M) over (p, s, r)."""
    M, LM = grid.M, grid.nodes_per_axis
    if zak_values.shape != (LM, M):
        raise ValueError(f"zak values shape {zak_values.shape} != {(LM, M)}")
    Zp = _demix_phases(grid) * zak_values
    return Zp.reshape(grid.L, M, M)


def patch_values(eta: SpreadingField) -> np.ndarray:
    """eta_{k,n}(t, nu) on box nodes: values * e^{2 pi i n s / (L M)}."""
    L, M = eta.grid.L, eta.grid.M
    n = np.arange(L)[None, :, None, None]
    s = np.arange(M)[None, None, :, None]
    return eta.values * np.exp(2j * np.pi * n * s / (L * M))


def reconstruct_eta_tensor(
    record: ResponseRecord,
    gamma: Sequence,
    G: Optional[GaborFrame] = None,
    support_rtol: float = 1e-8,
) -> SpreadingField:
    """Pathwise recovery of a field supported on at most L boxes.

    Solves G|_Gamma eta_Gamma(t, nu) = Z(t, nu) per grid node and unwinds
    the patch phases.  With fewer than L boxes the solve is overdetermined
    and out-of-support energy raises SupportViolation.
    """
    grid = record.grid
    if G is None:
        G = build_frame(record.train.window)
    gamma = [TorusIndex(int(k), int(n)) for k, n in gamma]
    cols = [atom_column(lam, G.L) for lam in gamma]
    if len(set(cols)) != len(cols):
        raise SingularSubframe("gamma contains boxes congruent mod L")
    if len(cols) > G.L:
        raise SingularSubframe(f"|gamma| = {len(cols)} exceeds L = {G.L}")
    sub = G.matrix[:, cols]
    from .tensor import matrix_rank_info

    info = matrix_rank_info(sub)
    if info.left_inverse is None:
        raise SingularSubframe("subframe columns are numerically dependent")
    L, M = grid.L, grid.M
    Zmat = demix(zak(record), grid).reshape(L, M * M)
    eta_gamma = info.left_inverse @ Zmat  # (|gamma|, M^2)
    scale = float(np.linalg.norm(Zmat))
    residual = float(np.linalg.norm(sub @ eta_gamma - Zmat))
    if scale > 0 and residual > support_rtol * scale:
        raise SupportViolation(residual / scale, support_rtol)
    values = np.zeros((L, L, M, M), dtype=complex)
    s = np.arange(M)[:, None]
    for j, (k, n) in enumerate(gamma):
        unwind = np.exp(-2j * np.pi * n * s / (L * M))
        values[k, n] = eta_gamma[j].reshape(M, M) * unwind
    return SpreadingField(grid=grid, values=values)


# ---------------------------------------------------------------------------
# autocorrelation paths


def ensemble_autocorrelation(responses) -> np.ndarray:
    """Empirical R_f = mean of f (x) conj(f) over the given responses."""
    if isinstance(responses, np.ndarray):
        F = responses
    else:
        records = list(responses)
        if len(records) < 1:
            raise ValueError("need at least one response")
        F = np.stack([r.samples for r in records])
    return F.T @ np.conj(F) / F.shape[0]


def exact_autocorrelation(
    model: StochasticSpreadingModel, train: DeltaTrain
) -> np.ndarray:
    """Analytic R_f = sum_j (H Phi_j) (x) conj(H Phi_j); no sampling."""
    Fop = forward_operator(model.grid, train)
    resp = model.factor_matrix() @ Fop.T  # (J, NS)
    return resp.T @ np.conj(resp)


def reconstruct_R(
    Rf: np.ndarray,
    p: Pattern,
    G: GaborFrame,
    grid: GridSpec,
    residual_rtol: float = 1e-8,
) -> np.ndarray:
    """Autocorrelation of the spreading function from the response
    autocorrelation, shape (LM, LM, LM, LM) over (t, nu, t', nu') nodes.

    Per pair of grid nodes the Zak-domain second moments assemble the L x L
    matrix Y(t,nu;t',nu') = G X G^H with X supported on the pattern; the
    left inverse of the restricted tensored frame extracts X and the patch
    phases are unwound.  Output is Hermitian under (t,nu) <-> (t',nu')
    swap-conjugation.
    """
    L, M = grid.L, grid.M
    NS = grid.n_samples
    Rf = np.asarray(Rf, dtype=complex)
    if Rf.shape != (NS, NS):
        raise ValueError(f"Rf shape {Rf.shape} != {(NS, NS)}")
    if p.L != L or G.L != L:
        raise MetadataMismatch("pattern / frame / grid dimensions disagree")
    rtf = restricted_tensor_frame(G, p)
    info = rank_and_left_inverse(rtf)
    if info.left_inverse is None:
        raise NotLeftInvertible(
            f"restricted frame rank {info.rank} < {rtf.n_columns} columns"
        )
    Zop = zak_operator(grid)
    d = _demix_phases(grid).reshape(-1)
    W = (d[:, None] * np.conj(d)[None, :]) * (Zop @ Rf @ Zop.conj().T)
    # rows/cols of W are (p, s, r); expose node pairs and stack vec(Y)
    W6 = W.reshape(L, M, M, L, M, M)
    Y_all = np.transpose(W6, (1, 2, 4, 5, 3, 0)).reshape(M**4, L * L)
    X_all = info.left_inverse @ Y_all.T  # (|pattern|, M^4)
    scale = float(np.linalg.norm(Y_all))
    residual = float(np.linalg.norm(rtf.matrix @ X_all - Y_all.T))
    if scale > 0 and residual > residual_rtol * scale:
        raise ResidualTooLarge(residual / scale, residual_rtol)
    na = grid.nodes_per_axis
    out = np.zeros((na, na, na, na), dtype=complex)
    s = np.arange(M)
    X4 = X_all.reshape(-1, M, M, M, M)
    for q, (lam, lamp) in enumerate(rtf.column_map):
        k, n = lam
        kp, npp = lamp
        phase = np.exp(-2j * np.pi * n * s / (L * M))[:, None, None, None]
        phase_p = np.exp(2j * np.pi * npp * s / (L * M))[None, None, :, None]
        out[
            k * M : (k + 1) * M,
            n * M : (n + 1) * M,
            kp * M : (kp + 1) * M,
            npp * M : (npp + 1) * M,
        ] = X4[q] * phase * phase_p
    out = (out + np.conj(out.transpose(2, 3, 0, 1))) / 2.0
    return out


def reconstruct_scattering_wssus(
    Rf: np.ndarray,
    G: GaborFrame,
    grid: GridSpec,
    p: Optional[Pattern] = None,
    residual_rtol: float = 1e-8,
) -> np.ndarray:
    """Scattering function from the response autocorrelation, shape (LM, LM).

    Specializes reconstruct_R to a diagonal-type pattern (always
    permissible, so the 2D spread may be as large as L) and returns the
    diagonal node slice.
    """
    if p is None:
        p = diagonal_pattern(grid.L)
    R4 = reconstruct_R(Rf, p, G, grid, residual_rtol=residual_rtol)
    na = grid.nodes_per_axis
    u = np.arange(na)
    return np.real(R4[u[:, None], u[None, :], u[:, None], u[None, :]])


# ---------------------------------------------------------------------------
# serialization: magic line + JSON header line + little-endian complex128


def _pack(kind: str, grid: GridSpec, arr: np.ndarray, extra: dict) -> bytes:
    header = {
        "kind": kind,
        "L": grid.L,
        "M": grid.M,
        "a": grid.a,
        "b": grid.b,
        "dim": arr.ndim,
        "shape": list(arr.shape),
    }
    header.update(extra)
    payload = np.ascontiguousarray(arr, dtype=np.complex128).astype("<c16").tobytes()
    return _FLD_MAGIC + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n" + payload


def _unpack(blob: bytes) -> tuple[dict, np.ndarray]:
    if not blob.startswith(_FLD_MAGIC + b"\n"):
        raise FormatError("bad magic for field container")
    nl = blob.index(b"\n", len(_FLD_MAGIC) + 1)
    header = json.loads(blob[len(_FLD_MAGIC) + 1 : nl].decode())
    arr = np.frombuffer(blob[nl + 1 :], dtype="<c16").astype(np.complex128)
    expected = int(np.prod(header["shape"]))
    if arr.size != expected:
        raise FormatError(f"payload holds {arr.size} values, header says {expected}")
    return header, arr.reshape(header["shape"])


def _grid_of(header: dict) -> GridSpec:
    return GridSpec(
        L=int(header["L"]), a=float(header["a"]), b=float(header["b"]), M=int(header["M"])
    )


def save_field(path, field: SpreadingField, seed: Optional[int] = None) -> None:
    blob = _pack("field", field.grid, field.values, {"seed": seed})
    with open(path, "wb") as fh:
        fh.write(blob)


def load_field(path) -> SpreadingField:
    with open(path, "rb") as fh:
        header, arr = _unpack(fh.read())
    if header["kind"] != "field":
        raise FormatError(f"expected a field container, got {header['kind']!r}")
    return SpreadingField(grid=_grid_of(header), values=arr)


def save_response(path, record: ResponseRecord) -> None:
    train = record.train
    extra = {
        "seed": record.realization_seed,
        "train": {
            "entries": [[z.real, z.imag] for z in train.window.entries],
            "unimodular": train.window.unimodular,
            "a": train.a,
            "k_start": train.k_start,
            "k_stop": train.k_stop,
        },
    }
    blob = _pack("response", record.grid, record.samples, extra)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_response(path) -> ResponseRecord:
    with open(path, "rb") as fh:
        header, arr = _unpack(fh.read())
    if header["kind"] != "response":
        raise FormatError(f"expected a response container, got {header['kind']!r}")
    grid = _grid_of(header)
    t = header["train"]
    train = DeltaTrain(
        window=Window(
            L=grid.L,
            entries=np.array([complex(re, im) for re, im in t["entries"]]),
            unimodular=bool(t["unimodular"]),
        ),
        a=float(t["a"]),
        k_start=int(t["k_start"]),
        k_stop=int(t["k_stop"]),
    )
    return ResponseRecord(
        grid=grid, samples=arr, train=train, realization_seed=header.get("seed")
    )


def save_array(path, kind: str, grid: GridSpec, arr: np.ndarray, seed=None) -> None:
    """Generic container for autocorrelation / scattering arrays."""
    with open(path, "wb") as fh:
        fh.write(_pack(kind, grid, np.asarray(arr, dtype=complex), {"seed": seed}))


def load_array(path, kind: Optional[str] = None) -> tuple[GridSpec, np.ndarray]:
    with open(path, "rb") as fh:
        header, arr = _unpack(fh.read())
    if kind is not None and header["kind"] != kind:
        raise FormatError(f"expected {kind!r} container, got {header['kind']!r}")
    return _grid_of(header), arr
