"""Principal component analysis for inspecting which metrics shape a dataset."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, format_number, select_features
from .errors import DegenerateError, DimensionError, FeatureMismatchError, OutputError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, vectors)`` with eigenvectors in the columns,
    sorted by descending eigenvalue. Sweeps stop once the off-diagonal
    Frobenius norm falls to ``tol`` times the matrix norm.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise DimensionError("matrix is not symmetric")
    a = (a + a.T) / 2
    v = np.eye(n)
    scale = np.linalg.norm(a)
    upper = np.triu_indices(n, 1)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(a[upper] ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # rotation angle that zeroes a[p, q]
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = a[:, p].copy()
                rot_q = a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p = a[p, :].copy()
                rot_q = a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise DegenerateError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted PCA. ``components`` has one unit vector per row, best first.

    All components are kept so the eigen-spectrum is complete;
    ``n_components`` is how many of them :func:`project` uses.
    """

    features: tuple[str, ...]
    means: np.ndarray
    scales: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    n_components: int
    standardize: bool

    def loadings(self, k: int | None = None) -> list[list[tuple[str, float]]]:
        """Per component, the features ranked by absolute loading."""
        k = self.n_components if k is None else k
        ranked = []
        for comp in self.components[:k]:
            order = np.argsort(-np.abs(comp), kind="stable")
            ranked.append([(self.features[i], float(comp[i])) for i in order])
        return ranked

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "standardize": self.standardize,
            "n_components": self.n_components,
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "components": self.components.tolist(),
            "loadings": [
                [{"feature": f, "loading": w} for f, w in comp] for comp in self.loadings()
            ],
        }

    def dump(self, path: str | Path) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


@dataclass(frozen=True, eq=False)
class Projection:
    points: np.ndarray
    labels: np.ndarray

    @property
    def n_components(self) -> int:
        return self.points.shape[1]


def fit_pca(
    d: Dataset,
    features: Sequence[str] | None = None,
    n_components: int = 2,
    standardize: bool = False,
) -> PcaModel:
    if features is not None:
        d = select_features(d, features)
    x = d.values
    n, p = x.shape
    if n < 2:
        raise DegenerateError(f"need at least 2 rows, got {n}")
    if not 1 <= n_components <= p:
        raise DimensionError(f"n_components={n_components} with {p} feature(s)")
    if p > n:
        raise DimensionError(f"{p} features but only {n} rows")
    means = x.mean(axis=0)
    centered = x - means
    scales = np.ones(p)
    if standardize:
        sd = centered.std(axis=0, ddof=1)
        scales = np.where(sd > 0, sd, 1.0)
        centered = centered / scales
    cov = centered.T @ centered / (n - 1)
    eigenvalues, vectors = jacobi_eigh(cov)
    total = eigenvalues.sum()
    if total <= 0:
        raise DegenerateError("all selected features are constant")
    components = _fix_signs(vectors).T
    return PcaModel(
        features=d.columns,
        means=means,
        scales=scales,
        components=components,
        eigenvalues=eigenvalues,
        explained_variance_ratio=eigenvalues / total,
        n_components=n_components,
        standardize=standardize,
    )


def project(m: PcaModel, d: Dataset) -> Projection:
    missing = [f for f in m.features if not d.has(f)]
    if missing:
        raise FeatureMismatchError(f"dataset lacks model features {missing}")
    x = select_features(d, m.features).values
    coords = ((x - m.means) / m.scales) @ m.components[: m.n_components].T
    return Projection(coords, np.array(d.labels))


def reconstruct(m: PcaModel, p: Projection) -> np.ndarray:
    k = p.n_components
    return (p.points @ m.components[:k]) * m.scales + m.means


def export_scatter(p: Projection, path: str | Path) -> None:
    """Write ``pc1[,pc2],label`` rows for an external plotter."""
    k = min(p.n_components, 2)
    if k < 1:
        raise DimensionError("projection has no components")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"pc{i + 1}" for i in range(k)] + ["label"])
            for pt, lab in zip(p.points, p.labels):
                w.writerow([format_number(v) for v in pt[:k]] + [int(lab)])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
