"""Seeded random sampling of slit-bundle points.

Base points are uniform in a safe ball (radius 0.8 of the metric domain);
fiber vectors are uniform on the unit sphere and then scaled by 10^U with
U uniform in a decade range, so identities are probed across |v| scales.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .jets import FinslerPoint
from .metrics import FinslerMetric


@dataclass(frozen=True)
class SampleConfig:
    count: int = 50
    seed: int = 0
    z_radius: Optional[float] = None
    v_log10_range: tuple[float, float] = (-1.0, 1.0)


def sample_points(m: FinslerMetric, config: SampleConfig) -> list[FinslerPoint]:
    rng = np.random.default_rng(config.seed)
    radius = config.z_radius
    if radius is None:
        radius = 0.8 * (m.domain_radius if m.domain_radius is not None else 1.0)
    n = m.n
    out = []
    while len(out) < config.count:
        w = rng.standard_normal(2 * n)
        w /= np.linalg.norm(w)
        r = radius * rng.random() ** (1.0 / (2 * n))
        z = r * (w[:n] + 1j * w[n:])
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        norm = np.linalg.norm(u)
        if norm < 1e-9 or np.abs(u).min() < 1e-3 * norm:
            # keep fiber components away from the coordinate axes so that
            # families like the l^p metrics stay smooth and non-degenerate
            continue
        lo, hi = config.v_log10_range
        v = u / norm * 10.0 ** rng.uniform(lo, hi)
        out.append(FinslerPoint(z, v))
    return out


def explicit_points(records, n: int) -> list[FinslerPoint]:
    """Points from JSON records [{'z': [[re,im],...], 'v': [[re,im],...]}]."""
    pts = []
    for rec in records:
        z = np.array([complex(a, b) for a, b in rec["z"]])
        v = np.array([complex(a, b) for a, b in rec["v"]])
        if z.shape[0] != n or v.shape[0] != n:
            raise ValueError(f"point dimension mismatch: expected {n}")
        pts.append(FinslerPoint(z, v))
    return pts
