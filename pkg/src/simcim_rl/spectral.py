"""Eigendecomposition of J and everything derived from it.

The decomposition is computed once per instance and shared: eigen-amplitude
observations e = Q^T c, per-eigenvector features phi, and the affine map
between the normalized regularization p-bar in [0, 1] and the raw coefficient
p in [lambda_min, lambda_max].
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problem import CouplingMatrix


class EigendecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    """Q columns are eigenvectors, lam sorted in decreasing order."""

    q: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def lam_max(self) -> float:
        return float(self.lam[0])

    @property
    def lam_min(self) -> float:
        return float(self.lam[-1])


@dataclass(frozen=True)
class ProblemFeatures:
    """phi_j = mean_i |Q_ij|; static per-instance conditioning features."""

    phi: np.ndarray


def eigendecompose(matrix: CouplingMatrix) -> SpectralDecomposition:
    """Symmetric eigendecomposition J = Q diag(lam) Q^T, lam decreasing.

    Column signs are fixed so each eigenvector's largest-magnitude component
    is positive, making observations reproducible across runs.
    """
    try:
        lam, q = np.linalg.eigh(matrix.j)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(f"eigh failed to converge: {exc}") from exc
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    q = q[:, order]
    flip = q[np.argmax(np.abs(q), axis=0), np.arange(q.shape[1])] < 0
    q = np.where(flip[None, :], -q, q)
    q.setflags(write=False)
    lam.setflags(write=False)
    return SpectralDecomposition(q=q, lam=lam)


def to_eigenbasis(decomp: SpectralDecomposition, c: np.ndarray) -> np.ndarray:
    """e = Q^T c; accepts a single vector (n,) or a batch (n, B)."""
    c = np.asarray(c, dtype=float)
    if c.shape[0] != decomp.n:
        raise ValueError(f"amplitude vector has {c.shape[0]} rows, expected {decomp.n}")
    return decomp.q.T @ c


def problem_features(decomp: SpectralDecomposition) -> ProblemFeatures:
    phi = np.abs(decomp.q).mean(axis=0)
    phi.setflags(write=False)
    return ProblemFeatures(phi=phi)


def denormalize_regularization(pbar: float, decomp: SpectralDecomposition) -> float:
    """p = pbar * (lambda_max - lambda_min) + lambda_min."""
    return pbar * (decomp.lam_max - decomp.lam_min) + decomp.lam_min


def matrix_content_hash(matrix: CouplingMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.int64(matrix.n).tobytes())
    h.update(np.ascontiguousarray(matrix.j).tobytes())
    return h.hexdigest()


def save_decomposition(decomp: SpectralDecomposition, path: str | Path) -> None:
    np.savez(path, q=decomp.q, lam=decomp.lam)


def load_decomposition(path: str | Path) -> SpectralDecomposition:
    with np.load(path) as data:
        q, lam = data["q"].copy(), data["lam"].copy()
    q.setflags(write=False)
    lam.setflags(write=False)
    return SpectralDecomposition(q=q, lam=lam)


def eigendecompose_cached(matrix: CouplingMatrix, cache_dir: str | Path | None) -> SpectralDecomposition:
    """Eigendecompose with an on-disk cache keyed by a content hash of J."""
    if cache_dir is None:
        return eigendecompose(matrix)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{matrix_content_hash(matrix)}.npz"
    if path.exists():
        return load_decomposition(path)
    decomp = eigendecompose(matrix)
    save_decomposition(decomp, path)
    return decomp


def decomposition_report(matrix: CouplingMatrix, decomp: SpectralDecomposition) -> dict:
    """Residual diagnostics used by tests and the CLI."""
    recon = decomp.q @ np.diag(decomp.lam) @ decomp.q.T
    j_norm = np.linalg.norm(matrix.j)
    return {
        "reconstruction_rel": float(np.linalg.norm(recon - matrix.j) / (j_norm if j_norm else 1.0)),
        "orthogonality_max": float(np.abs(decomp.q.T @ decomp.q - np.eye(decomp.n)).max()),
        "lam_max": decomp.lam_max,
        "lam_min": decomp.lam_min,
    }


def features_json(features: ProblemFeatures) -> str:
    return json.dumps(features.phi.tolist())
