"""Tanner measurement matrices: assembly, fast application and export."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .graphs import DoubleCover
from .inner_code import InnerCode


class BinaryMatrix:
    """0/1 matrix in compressed-row form; entry values are implicitly 1."""

    def __init__(self, n_rows: int, n_cols: int, indptr: np.ndarray, indices: np.ndarray):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        if self.indptr.shape != (self.n_rows + 1,) or self.indptr[-1] != self.indices.size:
            raise ValueError("indptr does not match the row count and index array")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n_cols):
            raise ValueError("column index out of range")
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        lengths = np.diff(self.indptr)
        self._starts = self.indptr[:-1][lengths > 0]
        self._nonempty = np.flatnonzero(lengths > 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def column_weights(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_cols)

    def apply(self, x) -> np.ndarray:
        """Sparse product ``A @ x`` in Theta(nnz) time."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_cols,):
            raise ValueError(f"expected a vector of length {self.n_cols}, got shape {x.shape}")
        y = np.zeros(self.n_rows)
        if self._starts.size:
            y[self._nonempty] = np.add.reduceat(x[self.indices], self._starts)
        return y

    __matmul__ = apply

    def apply_parallel(self, x, workers: int = 4, chunks: int | None = None) -> np.ndarray:
        """Row-partitioned :meth:`apply`; output is bit-identical to the serial one."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_cols,):
            raise ValueError(f"expected a vector of length {self.n_cols}, got shape {x.shape}")
        chunks = chunks or workers
        bounds = np.linspace(0, self.n_rows, chunks + 1).astype(int)
        y = np.zeros(self.n_rows)

        def work(lo: int, hi: int) -> None:
            a, b = self.indptr[lo], self.indptr[hi]
            lengths = np.diff(self.indptr[lo:hi + 1])
            rows = np.flatnonzero(lengths > 0)
            if rows.size:
                starts = self.indptr[lo:hi][rows] - a
                y[lo + rows] = np.add.reduceat(x[self.indices[a:b]], starts)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, bounds[:-1], bounds[1:]))
        return y

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=np.int64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def structurally_equal(self, other: BinaryMatrix) -> bool:
        a, b = self.to_scipy(), other.to_scipy()
        a.sort_indices()
        b.sort_indices()
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
        )

    @classmethod
    def from_dense(cls, M) -> BinaryMatrix:
        M = np.asarray(M)
        if not np.isin(M, (0, 1)).all():
            raise ValueError("matrix is not binary")
        return cls.from_scipy(sp.csr_matrix(M))

    @classmethod
    def from_scipy(cls, M) -> BinaryMatrix:
        M = sp.csr_matrix(M)
        M.eliminate_zeros()
        M.sort_indices()
        if M.nnz and not np.all(M.data == 1):
            raise ValueError("matrix entries must be 0 or 1")
        return cls(M.shape[0], M.shape[1], M.indptr, M.indices)


class TannerMatrix(BinaryMatrix):
    """The ``2kN x dN`` matrix stacking ``C0 @ x[Gamma(v)]`` over v in L then R."""

    def __init__(self, cover: DoubleCover, code: InnerCode):
        C = np.asarray(code.matrix)
        if C.shape[1] != cover.d:
            raise ValueError(f"inner code has {C.shape[1]} columns but the graph degree is {cover.d}")
        self.cover = cover
        self.code = code
        k = C.shape[0]
        gamma = np.vstack([cover.gamma_left, cover.gamma_right])
        pattern = np.concatenate([np.flatnonzero(row) for row in C]) if C.size else np.zeros(0, int)
        row_len = C.sum(axis=1).astype(np.int64)
        indices = gamma[:, pattern].ravel()
        indptr = np.concatenate([[0], np.cumsum(np.tile(row_len, 2 * cover.N))])
        super().__init__(2 * k * cover.N, cover.n_edges, indptr, indices)
        self._gamma = gamma

    @property
    def k(self) -> int:
        return self.code.k

    def blocks(self, x) -> np.ndarray:
        """``(2N, k)`` array whose row v is ``C0 @ x[Gamma(v)]``."""
        return self.apply(x).reshape(2 * self.cover.N, self.k)

    def structure_report(self) -> dict:
        return structure_report(self)

    def provenance(self, seed=None) -> dict:
        graph = self.cover.graph
        return {
            "N": self.cover.N,
            "d": self.cover.d,
            "lambda_certified": None if graph is None else graph.certified_lambda,
            "k": self.k,
            "delta0": self.code.delta0,
            "rho0": self.code.rho0,
            "tau0": self.code.tau0,
            "seed": seed,
        }


def assemble(H: DoubleCover, C0: InnerCode) -> TannerMatrix:
    return TannerMatrix(H, C0)


def structure_report(A: BinaryMatrix) -> dict:
    ratio = Fraction(A.n_rows, A.n_cols)
    return {
        "rows": A.n_rows,
        "cols": A.n_cols,
        "nnz": A.nnz,
        "max_col_weight": int(A.column_weights().max(initial=0)),
        "rows_per_n_ratio": ratio,
    }


def export_matrix_market(A: BinaryMatrix, path) -> None:
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, A.to_scipy().tocoo(), field="pattern", symmetry="general")


def import_matrix_market(path) -> BinaryMatrix:
    """Read a coordinate Matrix Market file with pattern or integer entries."""
    text = Path(path).read_text()
    if not text.strip():
        raise ValueError(f"{path}: empty Matrix Market file")
    header = text.lstrip().splitlines()[0].lower().split()
    if len(header) < 5 or header[0] != "%%matrixmarket" or header[1] != "matrix":
        raise ValueError(f"{path}: missing '%%MatrixMarket matrix' header")
    if header[2] != "coordinate":
        raise ValueError(f"{path}: only coordinate format is supported")
    if header[3] not in ("pattern", "integer"):
        raise ValueError(f"{path}: field must be pattern or integer, got {header[3]}")
    try:
        M = scipy.io.mmread(io.StringIO(text))
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed Matrix Market data ({exc})") from exc
    if M.shape[0] == 0 or M.shape[1] == 0:
        raise ValueError(f"{path}: matrix has an empty dimension")
    return BinaryMatrix.from_scipy(sp.csr_matrix(M, dtype=np.int64))
