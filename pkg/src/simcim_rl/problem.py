"""Max-Cut / Ising problem instances: Gset I/O, random generation, objectives.

Sign convention: a Gset file stores a graph adjacency W with positive cut
weights; we load J = -W so that the quadratic objective
C(J, x) = (x^T J x - sum(J)) / 4 is maximized exactly at the graph's maximum
cut and the Ising energy -x^T J x is minimized there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_NODES = 24


class GsetParseError(ValueError):
    """Malformed Gset text; message carries the offending line number."""


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric problem matrix J with zero diagonal."""

    j: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError(f"J must be square, got shape {j.shape}")
        if not np.array_equal(j, j.T):
            raise ValueError("J must be symmetric")
        if np.any(np.diagonal(j) != 0.0):
            raise ValueError("J must have zero diagonal (no self-loops)")
        j = j.copy()
        j.setflags(write=False)
        object.__setattr__(self, "j", j)

    @property
    def n(self) -> int:
        return self.j.shape[0]

    @property
    def weight_sum(self) -> float:
        """sum_ij J_ij, the constant offset between energy and cut value."""
        return float(self.j.sum())


@dataclass(frozen=True)
class GsetInstance:
    name: str
    matrix: CouplingMatrix
    best_known_cut: int | None = None


def parse_gset(text: str, name: str = "", best_known_cut: int | None = None) -> GsetInstance:
    """Parse Gset text: header "n m", then m lines "i j w" (1-based indices).

    Edge weights are negated on load (J = -W, see module docstring).
    """
    lines = text.splitlines()
    if not lines or not lines[0].split():
        raise GsetParseError("line 1: missing header")
    header = lines[0].split()
    if len(header) != 2:
        raise GsetParseError(f"line 1: expected 'n m' header, got {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise GsetParseError(f"line 1: non-integer header {lines[0]!r}") from None
    if n < 1 or m < 0:
        raise GsetParseError(f"line 1: invalid sizes n={n}, m={m}")

    j = np.zeros((n, n))
    seen = set()
    edges = 0
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise GsetParseError(f"line {lineno}: expected 'i j w', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
            w = float(parts[2])
        except ValueError:
            raise GsetParseError(f"line {lineno}: non-numeric edge {line!r}") from None
        if not (1 <= a <= n and 1 <= b <= n):
            raise GsetParseError(f"line {lineno}: node index out of range [1, {n}]")
        if a == b:
            raise GsetParseError(f"line {lineno}: self-loop on node {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GsetParseError(f"line {lineno}: duplicate edge {a}-{b}")
        seen.add(key)
        edges += 1
        j[a - 1, b - 1] = -w
        j[b - 1, a - 1] = -w
    if edges != m:
        raise GsetParseError(f"header declares {m} edges but body has {edges}")
    return GsetInstance(name=name, matrix=CouplingMatrix(j), best_known_cut=best_known_cut)


def serialize_gset(matrix: CouplingMatrix) -> str:
    """Emit the Gset text for J (weights un-negated back to W = -J)."""
    rows, cols = np.nonzero(np.triu(matrix.j, k=1))
    lines = [f"{matrix.n} {len(rows)}"]
    for a, b in zip(rows, cols):
        w = -matrix.j[a, b]
        w_text = str(int(w)) if w == int(w) else repr(float(w))
        lines.append(f"{a + 1} {b + 1} {w_text}")
    return "\n".join(lines) + "\n"


def _check_spins(matrix: CouplingMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.n,):
        raise ValueError(f"spin vector has shape {x.shape}, expected ({matrix.n},)")
    return x


def ising_energy(matrix: CouplingMatrix, x: np.ndarray) -> float:
    """Ising objective -x^T J x (lower is better)."""
    x = _check_spins(matrix, x)
    return float(-x @ matrix.j @ x)


def cut_value(matrix: CouplingMatrix, x: np.ndarray) -> float:
    """Cut value C(J, x) = (x^T J x - sum(J)) / 4 (higher is better)."""
    x = _check_spins(matrix, x)
    return float((x @ matrix.j @ x - matrix.weight_sum) / 4.0)


def batch_cut_values(matrix: CouplingMatrix, spins: np.ndarray) -> np.ndarray:
    """Cut values for a batch of spin columns, shape (n, B) -> (B,)."""
    spins = np.asarray(spins, dtype=float)
    if spins.shape[0] != matrix.n:
        raise ValueError(f"spin batch has {spins.shape[0]} rows, expected {matrix.n}")
    quad = np.einsum("ib,ib->b", spins, matrix.j @ spins)
    return (quad - matrix.weight_sum) / 4.0


def generate_erdos_renyi(
    n: int,
    connect_prob: float,
    weight_mode: str = "unit",
    seed: int | np.random.Generator = 0,
) -> CouplingMatrix:
    """Random G(n, p) coupling matrix, J = -W.

    "unit" mode gives every edge weight 1; "signed" draws +-1 with equal
    probability. Deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0.0 <= connect_prob <= 1.0:
        raise ValueError(f"connect_prob must be in [0, 1], got {connect_prob}")
    if weight_mode not in ("unit", "signed"):
        raise ValueError(f"unknown weight_mode {weight_mode!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    iu = np.triu_indices(n, k=1)
    present = rng.random(len(iu[0])) < connect_prob
    if weight_mode == "unit":
        weights = present.astype(float)
    else:
        signs = np.where(rng.random(len(iu[0])) < 0.5, 1.0, -1.0)
        weights = np.where(present, signs, 0.0)
    w = np.zeros((n, n))
    w[iu] = weights
    w += w.T
    return CouplingMatrix(-w)


def brute_force_max_cut(matrix: CouplingMatrix, chunk: int = 1 << 14) -> tuple[np.ndarray, float]:
    """Exact maximum cut by enumerating 2^(n-1) sign patterns (x and -x tie).

    Refuses n > BRUTE_FORCE_MAX_NODES; the first spin is pinned to +1.
    """
    n = matrix.n
    if n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_NODES}")
    total = 1 << (n - 1)
    bits = np.arange(n - 1)
    best_val = -np.inf
    best_x = None
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        # column 0 fixed at +1, remaining columns from the code bits
        x = np.ones((len(codes), n))
        x[:, 1:] = np.where((codes[:, None] >> bits) & 1, -1.0, 1.0)
        quad = np.einsum("bi,bi->b", x, x @ matrix.j)
        cuts = (quad - matrix.weight_sum) / 4.0
        k = int(np.argmax(cuts))
        if cuts[k] > best_val:
            best_val = float(cuts[k])
            best_x = x[k].copy()
    return best_x, best_val
