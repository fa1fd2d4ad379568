"""Per-point descriptor providers for the matching layer.

Three interchangeable sources of descriptors, all exposing
``describe(source, target) -> (source_desc, target_desc)``:

* OracleDescriptorProvider: randomized descriptors that encode the true
  correspondence (plus controllable noise). A test harness for the
  transport layer, not a registration method.
* LocalGeometryDescriptorProvider: handcrafted rigid-invariant signatures
  computed from each point's k-NN neighborhood. No training required.
* FileDescriptorProvider: externally computed features loaded from disk.

Descriptor files are either whitespace-separated text (one point per line)
or the binary format written by save_descriptors: a 16-byte little-endian
header (magic "OTRD", u32 count, u32 dim, u32 reserved) followed by
float32 values row-major.

Scale note: both built-in providers emit unit-norm descriptors, so scores
live in [-1, 1]. Only score/lambda enters the transport solver; pair these
providers with lambda around 0.1. Externally trained features typically
carry their own larger scale and match the conventional lambda = 1.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud, RigidTransform, transform_points

MAGIC = b"OTRD"
_HEADER = struct.Struct("<4sIII")

ANGLE_BINS = 9
DIST_BINS = 6
GEOMETRY_DESCRIPTOR_DIM = 10 + ANGLE_BINS + DIST_BINS


class DescriptorProvider(Protocol):
    """Produces one descriptor per point for a source/target pair."""

    dim: int

    def describe(self, source: PointCloud,
                 target: PointCloud) -> tuple[np.ndarray, np.ndarray]: ...


def _unit_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / np.maximum(norms, 1e-300)


def oracle_descriptors(
    source: PointCloud,
    target: PointCloud,
    gt: RigidTransform,
    dim: int = 64,
    noise_sigma: float = 0.1,
    rng: np.random.Generator | None = None,
    match_threshold: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors that encode ground-truth correspondence by construction.

    Every source point gets an independent random unit vector. A target
    point whose nearest transformed source point lies within
    match_threshold receives that point's descriptor plus isotropic noise
    (renormalized); other target points get fresh random unit vectors.
    """
    if rng is None:
        rng = np.random.default_rng()
    src_desc = _unit_rows(rng.normal(size=(len(source), dim)))
    moved = transform_points(gt, source.points)
    dist, idx = cKDTree(moved).query(target.points, k=1)
    matched = dist <= match_threshold

    tgt_desc = np.empty((len(target), dim))
    tgt_desc[matched] = src_desc[idx[matched]]
    if noise_sigma > 0 and matched.any():
        tgt_desc[matched] = _unit_rows(
            tgt_desc[matched] + noise_sigma * rng.normal(size=(int(matched.sum()), dim))
        )
    unmatched = ~matched
    if unmatched.any():
        tgt_desc[unmatched] = _unit_rows(rng.normal(size=(int(unmatched.sum()), dim)))
    return src_desc, tgt_desc


class OracleDescriptorProvider:
    """Provider wrapper around oracle_descriptors; needs the true transform."""

    def __init__(self, gt: RigidTransform, dim: int = 64, noise_sigma: float = 0.1,
                 match_threshold: float = 0.05, seed: int = 0):
        self.gt = gt
        self.dim = dim
        self.noise_sigma = noise_sigma
        self.match_threshold = match_threshold
        self.seed = seed

    def describe(self, source: PointCloud, target: PointCloud):
        rng = np.random.default_rng(self.seed)
        return oracle_descriptors(source, target, self.gt, self.dim,
                                  self.noise_sigma, rng, self.match_threshold)


def local_geometry_descriptors(pc: PointCloud, k_neighbors: int = 16) -> np.ndarray:
    """Rigid-invariant per-point signatures from k-NN neighborhoods.

    Layout (raw, not normalized):
      [0] linearity   (l1 - l2) / l1
      [1] planarity   (l2 - l3) / l1
      [2] sphericity  l3 / l1
      [3:6] covariance eigenvalues sorted descending, scaled by their sum
      [6:9] sqrt of the same eigenvalues (absolute neighborhood extent)
      [9] distance from the point to its neighborhood centroid
      [10:10+ANGLE_BINS] histogram of pairwise angles between neighbor
           offsets over equal bins of [0, pi], normalized to sum 1
      [...] histogram of neighbor distances over DIST_BINS equal bins of
           [0, max distance], normalized to sum 1

    Every component depends only on neighbor geometry relative to the
    point, so the signature is unchanged by rigid motion and by any
    permutation of the neighborhood. A fully degenerate neighborhood
    (all points coincident) produces the zero signature.
    """
    if k_neighbors < 4:
        raise ValueError("k_neighbors must be >= 4")
    if k_neighbors >= len(pc):
        raise ValueError("k_neighbors must be smaller than the point count")
    pts = pc.points
    _, nbr = cKDTree(pts).query(pts, k=k_neighbors + 1)
    out = np.zeros((len(pc), GEOMETRY_DESCRIPTOR_DIM))
    tri_i, tri_j = np.triu_indices(k_neighbors, k=1)
    angle_edges = np.linspace(0.0, np.pi, ANGLE_BINS + 1)
    a0 = 10
    d0 = a0 + ANGLE_BINS
    for i in range(len(pc)):
        rel = pts[nbr[i, 1:]] - pts[i]
        norms = np.linalg.norm(rel, axis=1)
        rmax = norms.max()
        if rmax < 1e-12:
            continue
        center = rel.mean(axis=0)
        cov = (rel - center).T @ (rel - center) / k_neighbors
        evals = np.sort(np.linalg.eigvalsh(cov))[::-1]
        evals = np.maximum(evals, 0.0)
        total = evals.sum()
        l1 = evals[0]
        if l1 > 0:
            out[i, 0] = (evals[0] - evals[1]) / l1
            out[i, 1] = (evals[1] - evals[2]) / l1
            out[i, 2] = evals[2] / l1
        if total > 0:
            out[i, 3:6] = evals / total
        out[i, 6:9] = np.sqrt(evals)
        out[i, 9] = np.linalg.norm(center)
        u = rel / np.maximum(norms, 1e-300)[:, None]
        cosang = np.clip((u[tri_i] * u[tri_j]).sum(axis=1), -1.0, 1.0)
        hist, _ = np.histogram(np.arccos(cosang), bins=angle_edges)
        out[i, a0:d0] = hist / hist.sum()
        dhist, _ = np.histogram(norms, bins=np.linspace(0.0, rmax, DIST_BINS + 1))
        out[i, d0:] = dhist / dhist.sum()
    return out


class LocalGeometryDescriptorProvider:
    """Handcrafted-descriptor provider; signatures are L2-normalized for
    inner-product matching (raw signatures via local_geometry_descriptors)."""

    def __init__(self, k_neighbors: int = 16):
        self.k_neighbors = k_neighbors
        self.dim = GEOMETRY_DESCRIPTOR_DIM

    def describe(self, source: PointCloud, target: PointCloud):
        ds = local_geometry_descriptors(source, self.k_neighbors)
        dt = local_geometry_descriptors(target, self.k_neighbors)
        return _unit_rows(ds), _unit_rows(dt)


def save_descriptors(path, descriptors: np.ndarray, fmt: str = "binary") -> None:
    """Write descriptors as text (decimal) or the OTRD binary format."""
    desc = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    path = Path(path)
    if fmt == "text":
        with open(path, "w") as fh:
            for row in desc:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    elif fmt == "binary":
        count, dim = desc.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, count, dim, 0))
            fh.write(desc.astype("<f4").tobytes(order="C"))
    else:
        raise ValueError(f"unknown descriptor format: {fmt}")


def load_descriptors(path) -> np.ndarray:
    """Read a descriptor file, sniffing the binary magic first.

    Text rows must all have the same number of values; the dimension is
    inferred from the first row.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        with open(path, "rb") as fh:
            magic, count, dim, _ = _HEADER.unpack(fh.read(_HEADER.size))
            data = np.frombuffer(fh.read(), dtype="<f4")
        if data.size != count * dim:
            raise ValueError(f"{path}: truncated descriptor payload")
        return data.reshape(count, dim).astype(np.float64)

    rows: list[list[float]] = []
    dim = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            try:
                row = [float(v) for v in fields]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad float value") from exc
            if dim is None:
                dim = len(row)
            elif len(row) != dim:
                raise ValueError(
                    f"{path}:{lineno}: inconsistent descriptor dimension "
                    f"({len(row)} vs {dim})"
                )
            rows.append(row)
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), dim or 0)


class FileDescriptorProvider:
    """Loads precomputed source/target descriptors from two files."""

    def __init__(self, source_path, target_path):
        self.source_desc = load_descriptors(source_path)
        self.target_desc = load_descriptors(target_path)
        if self.source_desc.shape[1] != self.target_desc.shape[1]:
            raise ValueError("descriptor dimension mismatch between files")
        self.dim = int(self.source_desc.shape[1])

    def describe(self, source: PointCloud, target: PointCloud):
        if self.source_desc.shape[0] != len(source):
            raise ValueError(
                f"source descriptor count {self.source_desc.shape[0]} does not "
                f"match cloud size {len(source)}"
            )
        if self.target_desc.shape[0] != len(target):
            raise ValueError(
                f"target descriptor count {self.target_desc.shape[0]} does not "
                f"match cloud size {len(target)}"
            )
        return self.source_desc, self.target_desc
