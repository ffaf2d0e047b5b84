#!/usr/bin/env python3
"""Regenerate the viewer's conformance fixtures from the primary package.

Writes viewer/fixtures/golden_bundle.json and viewer/fixtures/dbscan_cases.json.
The viewer test suite replays these cases against the client-side
implementations; tests/test_viewer_fixtures.py asserts the files match the
current primary implementation, so drift on either side fails a suite.
"""

import json
from pathlib import Path

import numpy as np

from strandscape import bundle, metrics, trajlog
from strandscape.embedding import Embedding

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "viewer" / "fixtures"

GOLDEN_LOG = """\
GCGAAC+GTTCGC
[1] ......+...... | 0.0 | 0.0
[1] (....)+...... | 1.5 | -0.8
[1] ((..))+...... | 3.0 | -2.4
[2] ......+...... | 0.0 | 0.0
[2] ((..))+...... | 2.0 | -2.4
"""


def golden_bundle() -> dict:
    parsed = trajlog.parse_log(GOLDEN_LOG)
    assert len(parsed.space) == 3
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.25, 1.0]])
    emb = Embedding(coords=coords)
    cr = metrics.dbscan(coords, eps=0.8, min_samples=1)
    traps = metrics.kinetic_traps(cr, parsed.space)
    doc = bundle.build_bundle(
        "golden-three-state", parsed, emb, clusters=cr, traps=traps,
        time_threshold=0.0,
    )
    return doc


def dbscan_cases() -> dict:
    rng = np.random.default_rng(2718)
    cases = []

    def add(name, pts, eps, min_samples):
        result = metrics.dbscan(np.asarray(pts, dtype=float), eps=eps,
                                min_samples=min_samples)
        cases.append({
            "name": name,
            "points": [[float(a) for a in row] for row in pts],
            "eps": eps,
            "min_samples": min_samples,
            "labels": list(result.labels),
        })

    blob_a = rng.normal(0.0, 0.05, size=(15, 2))
    blob_b = rng.normal(5.0, 0.05, size=(12, 2))
    outliers = np.array([[20.0, 20.0], [-9.0, 14.0]])
    add("two-blobs-with-outliers", np.vstack([blob_a, blob_b, outliers]),
        eps=0.5, min_samples=4)

    chain = np.stack([np.arange(20) * 0.3, np.zeros(20)], axis=1)
    add("chain-connects", chain, eps=0.35, min_samples=2)

    scattered = rng.uniform(-5, 5, size=(40, 2))
    add("uniform-scatter", scattered, eps=0.4, min_samples=3)

    dupes = np.array([[0.0, 0.0]] * 5 + [[3.0, 3.0]] * 2)
    add("duplicate-points", dupes, eps=0.1, min_samples=4)

    mixed = np.vstack([blob_a, scattered])
    add("blob-in-noise", mixed, eps=0.3, min_samples=5)

    elbow_pts = np.vstack([
        np.stack([np.arange(60) * 0.002, np.zeros(60)], axis=1),
        np.stack([np.arange(12) * 0.5 + 3.0, np.ones(12)], axis=1),
    ])
    elbow = {
        "points": [[float(a) for a in row] for row in elbow_pts],
        "k": 4,
        "eps": metrics.elbow_eps(elbow_pts, k=4),
    }
    return {"cases": cases, "elbow": elbow}


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "golden_bundle.json").write_text(
        json.dumps(golden_bundle(), sort_keys=True, indent=2) + "\n"
    )
    (FIXTURES / "dbscan_cases.json").write_text(
        json.dumps(dbscan_cases(), sort_keys=True, indent=2) + "\n"
    )
    print(f"wrote fixtures under {FIXTURES}")


if __name__ == "__main__":
    main()
