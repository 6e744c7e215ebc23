"""Build (apparent depth, reference depth) training samples from two clouds.

The image-based cloud is dense and refraction-shifted; the reference cloud
(LiDAR-like, or the simulator's truth) is sparser and correct. Pairing
reduces the dense cloud to one candidate per reference point, then drops
samples that violate the physics of refraction:

* rule A — apparent point at or below the reference point (``z0 <= z``),
  impossible since refraction always makes the seabed look shallower;
* rule B — apparent point at or above the water surface (``z0 >= 0``).

Retained samples satisfy ``z < z0 < 0``. Provenance counts are conserved
across the whole chain: input = retained + removed_A + removed_B +
removed_unmatched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .pointcloud import PointCloud, SpatialIndex

__all__ = [
    "SampleSet",
    "reduce_to_reference",
    "filter_samples",
    "split_samples",
    "merge_sets",
    "write_samples",
    "read_samples",
]

_COLUMNS = ("x", "y", "z0", "z")


@dataclass(frozen=True)
class SampleSet:
    """Depth samples as an (n, 4) array of columns x, y, z0, z."""

    data: np.ndarray
    provenance: dict

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError(f"sample array must have shape (n, 4), got {arr.shape}")
        if arr.flags.writeable or not arr.flags.c_contiguous:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "provenance", dict(self.provenance))

    def __len__(self):
        return self.data.shape[0]

    @property
    def x(self):
        return self.data[:, 0]

    @property
    def y(self):
        return self.data[:, 1]

    @property
    def z0(self):
        """Apparent elevation (image-based cloud)."""
        return self.data[:, 2]

    @property
    def z(self):
        """Reference elevation."""
        return self.data[:, 3]

    @staticmethod
    def from_arrays(x, y, z0, z, provenance: dict | None = None) -> "SampleSet":
        data = np.column_stack([
            np.asarray(x, dtype=np.float64),
            np.asarray(y, dtype=np.float64),
            np.asarray(z0, dtype=np.float64),
            np.asarray(z, dtype=np.float64),
        ])
        prov = {"input": data.shape[0], "retained": data.shape[0]}
        if provenance:
            prov.update(provenance)
        return SampleSet(data, prov)


def reduce_to_reference(
    image_cloud: PointCloud, reference_cloud: PointCloud, max_radius: float
) -> SampleSet:
    """One candidate sample per reference point.

    The sample takes (x, y, z) from the reference point and z0 from the
    planimetrically nearest image-based point, provided that neighbor lies
    within ``max_radius``; reference points without one are counted as
    ``removed_unmatched``. No physical filtering happens here.
    """
    if len(image_cloud) == 0 or len(reference_cloud) == 0:
        raise ValueError("both clouds must be non-empty")
    if not max_radius > 0:
        raise ValueError("max_radius must be positive")

    index = SpatialIndex(image_cloud)
    idx, d2 = index.nearest_many(reference_cloud.x, reference_cloud.y)
    matched = d2 <= max_radius * max_radius
    n_ref = len(reference_cloud)
    data = np.column_stack([
        reference_cloud.x[matched],
        reference_cloud.y[matched],
        image_cloud.z[idx[matched]],
        reference_cloud.z[matched],
    ])
    provenance = {
        "source_image": image_cloud.label,
        "source_reference": reference_cloud.label,
        "max_radius": float(max_radius),
        "input": n_ref,
        "removed_unmatched": int(n_ref - data.shape[0]),
        "removed_rule_a": 0,
        "removed_rule_b": 0,
        "retained": int(data.shape[0]),
    }
    return SampleSet(data, provenance)


def filter_samples(raw: SampleSet, positive_down: bool = False) -> SampleSet:
    """Drop refraction-impossible samples (rules A and B above).

    ``positive_down`` flips the comparisons for clouds stored with positive
    depths below the surface (rule A: z0 >= z; rule B: z0 <= 0); the default
    negative-elevation convention retains samples with z < z0 < 0. A sample
    violating both rules is counted once, under rule A.
    """
    z0 = raw.z0
    z = raw.z
    if positive_down:
        rule_a = z0 >= z
        rule_b = ~rule_a & (z0 <= 0.0)
    else:
        rule_a = z0 <= z
        rule_b = ~rule_a & (z0 >= 0.0)
    keep = ~rule_a & ~rule_b

    provenance = dict(raw.provenance)
    provenance["removed_rule_a"] = int(provenance.get("removed_rule_a", 0) + rule_a.sum())
    provenance["removed_rule_b"] = int(provenance.get("removed_rule_b", 0) + rule_b.sum())
    provenance["retained"] = int(keep.sum())
    return SampleSet(raw.data[keep], provenance)


def _subset(samples: SampleSet, idx: np.ndarray, provenance: dict) -> SampleSet:
    return SampleSet(samples.data[idx], provenance)


def split_samples(samples: SampleSet, fraction: float, seed: int):
    """Seeded uniform train/test split without replacement.

    ``|train| = round(fraction * n)`` (half-up). The two parts keep the
    original sample order and partition the input exactly.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("cannot split an empty sample set")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    n_train = int(np.floor(fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    base = {"split_fraction": float(fraction), "split_seed": int(seed), "split_of": n}
    train = _subset(samples, train_idx, {**samples.provenance, **base, "role": "train"})
    test = _subset(samples, test_idx, {**samples.provenance, **base, "role": "test"})
    return train, test


def merge_sets(a: SampleSet, b: SampleSet, fraction_b: float, seed: int = 0) -> SampleSet:
    """All of ``a`` plus a seeded random ``fraction_b`` of ``b``.

    The picked subset of ``b`` keeps its original order, so the merge is
    order-stable for a given seed.
    """
    if len(a) == 0:
        raise ValueError("first sample set must be non-empty")
    if not 0.0 < fraction_b <= 1.0:
        raise ValueError("fraction_b must be in (0, 1]")
    n_b = int(np.floor(fraction_b * len(b) + 0.5))
    pick = np.sort(np.random.default_rng(seed).permutation(len(b))[:n_b])
    data = np.vstack([a.data, b.data[pick]])
    provenance = {
        "merged_from": [a.provenance.get("source_reference", ""), b.provenance.get("source_reference", "")],
        "n_a": len(a),
        "n_b_picked": int(n_b),
        "n_b_total": len(b),
        "fraction_b": float(fraction_b),
        "merge_seed": int(seed),
        "input": len(a) + n_b,
        "retained": len(a) + n_b,
    }
    return SampleSet(data, provenance)


def write_samples(samples: SampleSet, path) -> None:
    """CSV with header ``x,y,z0,z`` plus a ``.provenance.json`` sidecar."""
    path = Path(path)
    lines = [",".join(_COLUMNS)]
    lines.extend(
        "%.6f,%.6f,%.6f,%.6f" % (r[0], r[1], r[2], r[3]) for r in samples.data
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = path.with_suffix(".provenance.json")
    sidecar.write_text(
        json.dumps(samples.provenance, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def read_samples(path) -> SampleSet:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read sample file {path}: {exc}") from exc
    rows = []
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        try:
            if len(fields) < 4:
                raise ValueError("fewer than 4 fields")
            rows.append(tuple(float(v) for v in fields[:4]))
        except ValueError:
            if not seen_data:
                seen_data = True  # optional header line
                continue
            raise InputError(f"{path}:{lineno}: malformed sample row: {raw!r}") from None
        seen_data = True
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, 4))
    sidecar = path.with_suffix(".provenance.json")
    if sidecar.exists():
        provenance = json.loads(sidecar.read_text(encoding="utf-8"))
    else:
        provenance = {"input": data.shape[0], "retained": data.shape[0]}
    return SampleSet(data, provenance)
