"""Mode-indexed Hessian blocks, tail-indexed Gram blocks, and their spectra.

Two equivalent constructions of the same operator family live here.  The
kernel oracle expands

    K(x, x') = log(1 - x conj(x') U(x) conj(U(x')))

directly and reads off H_{mn} = -mn [x^m][conj(x')^n] K; it is exact but
only affordable at small sizes.  The Gram route assembles, per symmetry
class q (indices p_j = q + j*s), the entries

    G_{j1 j2} = sum_m ((p_{j2} + s m)^2 / sqrt(p_{j1} p_{j2}))
                * conj(R_{p_{j1}}(m + j2 - j1)) * R_{p_{j2}}(m),

optionally renormalized by the weights w_j = p_j^{3/2+beta} alpha^{p_j}.
The weighted assembly fuses the weights into alpha-scaled coefficient rows
(R_p / alpha^p), so no alpha^{p_j} is ever materialized and the block
stays finite far beyond the overflow point of the weights themselves.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, TailNotConverged
from .series_engine import (
    ParamPoint,
    PowerSeries,
    _branch_values_on_circle,
    branch_power_rows,
    powers_table,
    taylor_branch,
)

__all__ = [
    "RenormConfig",
    "HermitianMatrix",
    "kernel_hessian_oracle",
    "gram_block",
    "mode_gram_vectors",
    "eigenvalues",
    "eigensystem",
    "hs_norm",
    "tail_cutoff_for",
    "check_alpha_admissible",
]

_LOG_DBL_MAX = math.log(sys.float_info.max)


@dataclass(frozen=True)
class RenormConfig:
    """Truncation and renormalization knobs for one symmetry block.

    ``q`` selects the residue class (1..s); block indices are
    p_j = q + j*s for j = 0..J.  ``tail_cutoff`` is the number of tail
    terms summed per Gram entry.  Construction verifies q's range and
    that every weight w_j = p_j^(3/2+beta) * alpha^p_j is finite in
    double precision, even though assemblies never form them.
    """

    q: int
    s: int
    J: int = 70
    alpha: float = 2.0
    beta: float = 1.0
    tail_cutoff: int = 64
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("symmetry index s must be >= 1")
        if not 1 <= self.q <= self.s:
            raise ValueError(f"q must lie in 1..s, got q={self.q}, s={self.s}")
        if self.J < 1 or self.tail_cutoff < 1:
            raise ValueError("J and tail_cutoff must be >= 1")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        p_top = self.q + self.J * self.s
        log_w = (1.5 + self.beta) * math.log(p_top) + p_top * math.log(self.alpha)
        if log_w >= _LOG_DBL_MAX:
            raise ValueError(
                f"weight w_J for p_J={p_top} overflows double precision "
                f"(log w = {log_w:.1f})"
            )

    @property
    def p_indices(self) -> np.ndarray:
        return self.q + self.s * np.arange(self.J + 1)


@dataclass
class HermitianMatrix:
    """Dense Hermitian matrix; hermiticity holds exactly by mirroring."""

    dim: int
    entries: np.ndarray

    @classmethod
    def from_lower(cls, lower: np.ndarray) -> "HermitianMatrix":
        """Build from an array with only the lower triangle (incl. diagonal)
        filled; the strict upper triangle is overwritten by the mirror and
        the diagonal's imaginary part is dropped."""
        a = np.array(lower, dtype=np.complex128)
        n = a.shape[0]
        i, j = np.triu_indices(n, k=1)
        a[i, j] = np.conj(a[j, i])
        di = np.diag_indices(n)
        a[di] = a[di].real
        return cls(dim=n, entries=a)

    def __sub__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        return HermitianMatrix(self.dim, self.entries - other.entries)


def kernel_hessian_oracle(p: ParamPoint, m_max: int) -> HermitianMatrix:
    """Direct expansion of the log-kernel; entry (m-1, n-1) holds H_{mn}.

    H_{mn} = m n sum_{p <= min(m,n), p == m == n (mod s)}
             (1/p) R_p((m-p)/s) conj(R_p((n-p)/s)),

    zero whenever m and n differ mod s.  Ground truth for small sizes.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    s = p.leaf.s
    order = m_max // s + 1
    tab = powers_table(taylor_branch(p, order), m_max)
    R = np.vstack([t.coeffs for t in tab])  # R[p-1, k] = R_p(k)
    H = np.zeros((m_max, m_max), dtype=np.complex128)
    for m in range(1, m_max + 1):
        for n in range(1, m + 1):
            if (m - n) % s:
                continue
            acc = 0.0 + 0.0j
            for pw in range(n % s if n % s else s, n + 1, s):
                acc += (R[pw - 1, (m - pw) // s]
                        * np.conj(R[pw - 1, (n - pw) // s]) / pw)
            H[m - 1, n - 1] = m * n * acc
    return HermitianMatrix.from_lower(H)


def tail_cutoff_for(rho_star: float, s: int, tail_tol: float = 1e-12) -> int:
    """Tail length making the geometric entry truncation error <= tail_tol.

    Entry tails decay like eta^m with eta = rho_*^(-2s); the floor of 64
    keeps shallow (large-eps) points from under-resolving the prefactor.
    """
    if not rho_star > 1:
        raise ValueError("tail cutoff needs a subcritical point (rho_* > 1)")
    eta = rho_star ** (-2 * s)
    return max(64, math.ceil(math.log(tail_tol) / math.log(eta)))


def gram_block(p: ParamPoint, cfg: RenormConfig, use_weights: bool,
               rho_star: float | None = None) -> HermitianMatrix:
    """Assemble one (J+1)x(J+1) symmetry block of the Gram operator.

    With ``use_weights`` the returned entries are
    G~_{j1j2} = G_{j1j2} / (w_{j1} w_{j2}), computed from alpha-scaled
    coefficient rows and the polynomial weight parts only.

    ``rho_star`` (if known) marks the point as subcritical, enabling the
    circle-sampling coefficient path for deep tails and sharpening the
    required-cutoff estimate in the truncation error.

    Raises
    ------
    TailNotConverged
        If for some entry the last retained term exceeds tail_tol times
        the accumulated entry; carries an estimate of the cutoff that
        would suffice.
    """
    if cfg.s != p.leaf.s:
        raise ValueError(f"config s={cfg.s} does not match leaf s={p.leaf.s}")
    J, M = cfg.J, cfg.tail_cutoff
    order = M + J
    alpha = cfg.alpha if use_weights else 1.0
    pj = cfg.p_indices.astype(np.float64)
    subcritical = rho_star is not None and rho_star > 1
    R = branch_power_rows(p, list(cfg.p_indices), order, alpha=alpha,
                          subcritical=subcritical)

    # Row-shifted synthesis layout B[j, i] = R_{p_j}(i - j): the tail weight
    # becomes (p_{j2} + s m)^2 = p_i^2 on the shared row index i, so the
    # whole block is one rank-(M+J+1) matrix product.
    width = order + 1
    B = np.zeros((J + 1, width), dtype=np.complex128)
    for j in range(J + 1):
        B[j, j:] = R[j, : width - j]
    del R
    p_i = cfg.q + cfg.s * np.arange(width, dtype=np.float64)
    C = B * p_i**2
    for j in range(1, J + 1):
        C[j, : j] = 0.0  # (redundant: B already vanishes there)
    for j in range(J + 1):
        C[j, j + M + 1 :] = 0.0  # literal tail window m <= M per column
    G_pre = B.conj() @ C.T  # G_pre[j1, j2] = entry for j1 <= j2

    if use_weights:
        norm = pj ** -(2.0 + cfg.beta)
    else:
        norm = pj ** -0.5
    G_pre *= np.outer(norm, norm)

    # truncation check: last retained term vs accumulated entry, upper triangle
    j_all = np.arange(J + 1)
    lastC = np.abs(C[j_all, j_all + M])
    lastB = np.abs(B[:, j_all + M])  # [j1, j2]
    last = lastB * lastC[None, :] * np.outer(norm, norm)
    del C
    iu = np.triu_indices(J + 1)
    ent_abs = np.abs(G_pre[iu])
    bad = (ent_abs > 0) & (last[iu] > cfg.tail_tol * ent_abs)
    if np.any(bad):
        worst_ratio = float((last[iu][bad] / ent_abs[bad]).max())
        if subcritical:
            eta = rho_star ** (-2 * cfg.s)
            extra = math.ceil(math.log(cfg.tail_tol / worst_ratio)
                              / math.log(eta))
        else:
            extra = M
        raise TailNotConverged(
            f"last tail term is {worst_ratio:.2e} of its entry "
            f"(tol {cfg.tail_tol:g}) at M_tail={M}",
            required_cutoff=M + max(extra, 1),
        )
    return HermitianMatrix.from_lower(np.tril(G_pre.conj().T))


def mode_gram_vectors(p: ParamPoint, q: int, j_max: int,
                      p_count: int) -> list[np.ndarray]:
    """Synthesis vectors v^{(p)}_j = (p_j / sqrt(p)) R_p((p_j - p)/s).

    One vector per mode p = q + k*s, k = 0..p_count, each of length
    j_max + 1, zero below the mode's onset (p_j < p).  Finite partial sums
    of v v* reproduce kernel_hessian_oracle entries exactly.
    """
    s = p.leaf.s
    if not 1 <= q <= s:
        raise ValueError(f"q must lie in 1..s, got {q}")
    u = taylor_branch(p, j_max)
    top_power = q + p_count * s
    tab = powers_table(u, top_power)
    pj = q + s * np.arange(j_max + 1)
    out = []
    for k in range(p_count + 1):
        mode = q + k * s
        v = np.zeros(j_max + 1, dtype=np.complex128)
        v[k:] = pj[k:] / math.sqrt(mode) * tab[mode - 1].coeffs[: j_max + 1 - k]
        out.append(v)
    return out


def eigensystem(h: HermitianMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvector columns."""
    try:
        vals, vecs = np.linalg.eigh(h.entries)
    except np.linalg.LinAlgError as e:
        raise NoConvergence(f"Hermitian eigensolve failed: {e}") from e
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def eigenvalues(h: HermitianMatrix) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, sorted descending."""
    try:
        vals = np.linalg.eigvalsh(h.entries)
    except np.linalg.LinAlgError as e:
        raise NoConvergence(f"Hermitian eigensolve failed: {e}") from e
    return vals[::-1]


def hs_norm(h: HermitianMatrix) -> float:
    """Hilbert-Schmidt (Frobenius) norm of the truncated block."""
    return float(np.linalg.norm(h.entries))


def check_alpha_admissible(p: ParamPoint, rho_star: float,
                           alpha: float) -> float:
    """Estimate the branch bound on the midpoint circle and warn if alpha
    does not clear it.

    Samples |U| on |x| = (1 + rho_*)/2 and returns the maximum; the
    weighted renormalization is only guaranteed to tame the blocks when
    alpha exceeds this scale, so alpha <= max|U| triggers a warning rather
    than an error (the truncated numerics stay finite either way).
    """
    radius_z = ((1.0 + rho_star) / 2.0) ** p.leaf.s
    vals = _branch_values_on_circle(p, 512, radius=radius_z)
    m0 = float(np.abs(vals).max())
    if alpha <= m0:
        warnings.warn(
            f"alpha={alpha:g} does not exceed the midpoint branch bound "
            f"{m0:.3g}; weighted blocks may grow along the approach",
            RuntimeWarning,
            stacklevel=2,
        )
    return m0
