"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line with its runtime (visible even under pytest capture)."""

import json
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from strandscape import bundle, distances, embedding, metrics, scattering, trajlog
from strandscape.ctmc import (
    EnergyModel,
    RateMatrix,
    boltzmann,
    check_detailed_balance,
    mfpt,
    propagator,
    ssa_ensemble,
)
from strandscape.distances import NeighborTable, WeightTable, ged_knn, mpt_graph, mpt_knn
from strandscape.dp import adjacency_vector, parse_dp, to_graph
from strandscape.embedding import (
    Embedding,
    PhateConfig,
    StressConfig,
    classical_mds,
    eval_l_ged,
    eval_l_mpt,
    pairwise_euclidean,
    phate,
    smacof_mds,
    stress_embed,
    stress_gradient,
)
from strandscape.scattering import ScatteringConfig, lazy_walk, scatter
from util import (
    bellman_ford_all,
    canonical_labels,
    dbscan_reference,
    random_rotation,
    random_structure,
    reaction_states,
    structure_walk,
)

FIXTURE = Path(__file__).parent / "fixtures" / "sample_fsm.log"

# one line per criterion; conftest prints these in the terminal summary
CRITERION_RESULTS: list[str] = []


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        CRITERION_RESULTS.append(f"[FAIL] {name}")
        print(f"\n[FAIL] {name}", file=sys.__stdout__, flush=True)
        raise
    elapsed = time.perf_counter() - start
    status = "PASS" if elapsed < budget_s else "FAIL"
    line = f"[{status}] {name} ({elapsed:.2f}s / budget {budget_s:.0f}s)"
    CRITERION_RESULTS.append(line)
    print(f"\n{line}", file=sys.__stdout__, flush=True)
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s budget"


# expected (dp, time in us, energy) triples of the sample log, in order
SAMPLE_TRIPLES = [
    ("....(.((((..........)))).+.((((..........)))).)....", 0.0000000, -1.737),
    ("...((.((((..........)))).+.((((..........)))).))...", 0.1153000, -2.137),
    ("...(((((((..........)))).+.((((..........)))))))...", 0.1802000, -1.787),
    ("....((((((..........)))).+.((((..........))))))....", 0.2768000, -1.387),
    ("....((((((...(.....))))).+.((((..........))))))....", 0.5369000, 1.392),
    ("((((((((((..........))...+...((..((....))))))))))))", 17.760000, -1.310),
    ("(((((((.((..........))...+...((..((....)))).)))))))", 17.800000, -1.829),
    ("((((((((((..........))...+...((..((....))))))))))))", 17.860000, -1.310),
    ("(((((((.((..........))...+...((..((....)))).)))))))", 17.940000, -1.829),
    (".((((((.((..........))...+...((..((....)))).))))))." , 18.140000, -1.961),
    (".(((((((((((((((((((((...+...)))))))))))))))))))))." , 71.570000, -27.496),
    (".((((((((((((((((((((((..+..))))))))))))))))))))))." , 71.620000, -26.401),
    (".((((((((((((((((((((((.(+).))))))))))))))))))))))." , 71.810000, -26.201),
    ("(((((((((((((((((((((((.(+).)))))))))))))))))))))))", 71.900000, -26.069),
    ("(((((((((((((((((((((((((+)))))))))))))))))))))))))", 71.910000, -30.522),
]


def test_parser_conformance():
    with criterion("parser conformance on the sample log", 1.0):
        text = FIXTURE.read_text()
        parsed = trajlog.parse_log(text)
        assert len(parsed.trajectories) == 1
        steps = parsed.trajectories[0].steps
        assert len(steps) == len(SAMPLE_TRIPLES)
        for step, (dp, t_us, dg) in zip(steps, SAMPLE_TRIPLES):
            assert parsed.space.states[step.state_id].dp == dp
            assert step.time == t_us / 1e6
            assert step.energy == dg
        # round trip through the dataset serialization is byte-stable
        text1 = json.dumps(trajlog.dataset_to_dict(parsed), sort_keys=True)
        again = trajlog.dataset_from_dict(json.loads(text1))
        text2 = json.dumps(trajlog.dataset_to_dict(again), sort_keys=True)
        assert text1.encode() == text2.encode()


def _reversible_chain(rng, n, beta=1.0):
    dg = rng.normal(0, 1.5, size=n)
    rates = np.zeros((n, n))
    order = list(rng.permutation(n))
    links = set(zip(order, order[1:]))
    for _ in range(n):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            links.add((int(a), int(b)))
    for a, b in links:
        scale = rng.uniform(0.5, 2.0)
        rates[a, b] = scale * min(1.0, math.exp(-beta * (dg[b] - dg[a])))
        rates[b, a] = scale * min(1.0, math.exp(-beta * (dg[a] - dg[b])))
    return RateMatrix.from_off_diagonal(rates), EnergyModel(dg, beta)


def test_ctmc_oracle_suite():
    with criterion("CTMC oracle suite", 30.0):
        chain = RateMatrix.from_off_diagonal(
            np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        )
        tau = mfpt(chain, {2})
        assert np.abs(tau - np.array([3.0, 2.0, 0.0])).max() <= 1e-12

        runs = ssa_ensemble(chain, np.array([1.0, 0, 0]), {2},
                            base_seed=2024, n_runs=10000)
        fpt = np.array([r.times[-1] for r in runs])
        se = fpt.std(ddof=1) / math.sqrt(len(fpt))
        assert abs(fpt.mean() - 3.0) <= 3 * se

        rng = np.random.default_rng(99)
        for _ in range(5):
            rm, model = _reversible_chain(rng, 5)
            s, t = rng.uniform(0.05, 2.0, size=2)
            semigroup = propagator(rm, s) @ propagator(rm, t)
            assert np.abs(semigroup - propagator(rm, s + t)).max() <= 1e-8
            pi = boltzmann(model)
            assert np.abs(pi @ propagator(rm, 0.9) - pi).max() <= 1e-8

        # detailed balance fixtures: one passing, one violating
        ok_rm = RateMatrix.from_off_diagonal(np.array([[0.0, 1.0], [0.5, 0.0]]))
        ok_model = EnergyModel(np.array([0.0, -math.log(2)]), beta=1.0)
        assert check_detailed_balance(ok_rm, ok_model).ok
        bad_rm = RateMatrix.from_off_diagonal(np.array([[0.0, 1.0], [1.0, 0.0]]))
        report = check_detailed_balance(bad_rm, ok_model)
        assert not report.ok and len(report.violations) == 1


def test_scattering_invariants():
    with criterion("scattering invariants", 10.0):
        rng = np.random.default_rng(7)
        for _ in range(100):
            g = to_graph(random_structure(rng, [9, 8]))
            P = lazy_walk(g)
            d = g.degrees().astype(float)
            powers = [P]
            for _ in range(4):
                powers.append(powers[-1] @ powers[-1])
            f = rng.standard_normal(g.n)
            for j in range(1, 5):
                psi = powers[j - 1] - powers[j]
                assert abs((psi @ f).sum()) <= 1e-10
                assert np.abs(psi @ d).max() <= 1e-10

        # a single-edge graph has an idempotent operator: zero band-pass
        g2 = to_graph(parse_dp("..", [2]))
        v = scatter(g2, ScatteringConfig(J=4))
        for idx in range(v.values.size):
            filt, _, _ = v.layout.slot(idx)
            if filt.startswith("psi"):
                assert abs(v.values[idx]) <= 1e-12

        # nodewise order-1 layout arithmetic: m = L^2 (J + 1)
        g6 = to_graph(parse_dp("((..))", [6]))
        v6 = scatter(g6, ScatteringConfig(J=4, order=1, aggregation="nodewise"))
        assert v6.values.size == 36 * 5


def test_distance_oracles():
    with criterion("distance oracles", 60.0):
        rng = np.random.default_rng(13)
        # passage-time kNN against all-sources Bellman-Ford, exact
        for _ in range(50):
            n = int(rng.integers(20, 201))
            edges = []
            seen = set()
            for u in range(n):
                for v in rng.choice(n, size=3, replace=False):
                    v = int(v)
                    if u != v and (u, v) not in seen:
                        seen.add((u, v))
                        edges.append((u, v, float(rng.integers(1, 160)) / 16.0))
            by_source: dict[int, list[tuple[int, float]]] = {}
            for u, v, w in edges:
                by_source.setdefault(u, []).append((v, w))
            graph = distances.MptGraph(
                n=n, edges={u: tuple(sorted(vs)) for u, vs in by_source.items()}
            )
            table = mpt_knn(graph, k=n)
            oracle = bellman_ford_all(n, edges)
            for src in range(n):
                expected = sorted(
                    (float(oracle[v, src]), v) for v in range(n)
                    if v != src and np.isfinite(oracle[v, src])
                )
                assert [(d, j) for j, d in table.neighbors[src]] == [
                    (d, v) for d, v in expected
                ]

        # exact edit-distance kNN against all-pairs brute force
        structures = structure_walk(rng, [10, 9], 300)
        X = np.stack([adjacency_vector(s) for s in structures])
        table = ged_knn(structures, k=20, mode="exact")
        for i in range(len(structures)):
            d = np.abs(X - X[i]).sum(axis=1)
            expected = sorted((float(di), j) for j, di in enumerate(d) if j != i)[:20]
            assert [(d_, j) for j, d_ in table.neighbors[i]] == expected

        # random-projection recall@100 on 2000 synthetic states
        big = reaction_states(rng, 15, 2000)
        exact = ged_knn(big, k=100, mode="exact")
        approx = ged_knn(big, k=100, mode="random_projection", seed=5)
        recalls = []
        for e_row, a_row in zip(exact.neighbors, approx.neighbors):
            e_ids = {j for j, _ in e_row}
            recalls.append(len(e_ids & {j for j, _ in a_row}) / len(e_ids))
        assert float(np.mean(recalls)) >= 0.9


def _random_tables(rng, n, per_state=4):
    rows = []
    for i in range(n):
        picks = [int(j) for j in rng.choice(n, size=per_state, replace=False)
                 if j != i]
        entries = sorted(
            ((j, float(rng.uniform(0.5, 3.0))) for j in picks),
            key=lambda e: (e[1], e[0]),
        )
        rows.append(tuple(entries))
    nbrs = NeighborTable(metric="mpt", k=per_state, neighbors=tuple(rows))
    weights = WeightTable(p=tuple(rng.uniform(0.1, 1.0, size=n)))
    return nbrs, weights


def test_embedding_suite():
    with criterion("embedding suite", 60.0):
        rng = np.random.default_rng(23)
        # analytic stress gradients against central differences
        for _ in range(20):
            n = 10
            Z = rng.standard_normal((n, 2)) * 2
            nbrs, weights = _random_tables(rng, n)
            grad = stress_gradient(Z, nbrs, weights, coefficient=0.31)
            h = 1e-6
            for idx in [(0, 0), (3, 1), (7, 0), (9, 1)]:
                zp, zm = Z.copy(), Z.copy()
                zp[idx] += h
                zm[idx] -= h
                fd = (0.31 * eval_l_mpt(zp, nbrs, weights)
                      - 0.31 * eval_l_mpt(zm, nbrs, weights)) / (2 * h)
                denom = max(abs(fd), abs(grad[idx]), 1e-8)
                assert abs(grad[idx] - fd) / denom < 1e-5

        # SMACOF: monotone stress and exact self-consistency
        X = rng.standard_normal((10, 2))
        D = pairwise_euclidean(X)
        emb = smacof_mds(D, dim=2, max_iter=500, tol=1e-15,
                         init=classical_mds(D, 2))
        assert emb.diagnostics["final_stress"] <= 1e-10
        assert np.abs(pairwise_euclidean(emb.coords) - D).max() <= 1e-6
        Dr = rng.uniform(0.5, 3.0, size=(12, 12))
        Dr = (Dr + Dr.T) / 2
        np.fill_diagonal(Dr, 0.0)
        trace = smacof_mds(Dr, dim=2, max_iter=120, tol=0.0,
                           seed=3).diagnostics["stress_trace"]
        assert all(b <= a + 1e-12 * max(1.0, a) for a, b in zip(trace, trace[1:]))

        # PHATE separates two well-separated clusters
        a = rng.normal(0.0, 1.0, size=(100, 10))
        b = rng.normal(20.0, 1.0, size=(100, 10))
        emb2 = phate(features=np.vstack([a, b]), config=PhateConfig(seed=0))
        labels = np.array([0] * 100 + [1] * 100)
        Dd = pairwise_euclidean(emb2.coords)
        np.fill_diagonal(Dd, np.inf)
        assert (labels[Dd.argmin(axis=1)] == labels).mean() >= 0.99

        # losses are rigid-motion invariant
        Z = rng.standard_normal((8, 2))
        nbrs, weights = _random_tables(rng, 8, per_state=3)
        base_m, base_g = eval_l_mpt(Z, nbrs, weights), eval_l_ged(Z, nbrs)
        R = random_rotation(rng, 2)
        moved = Z @ R + np.array([3.7, -1.2])
        assert abs(eval_l_mpt(moved, nbrs, weights) - base_m) <= 1e-9 * max(1, base_m)
        assert abs(eval_l_ged(moved, nbrs) - base_g) <= 1e-9 * max(1, base_g)


def test_eval_suite():
    with criterion("eval suite", 30.0):
        rng = np.random.default_rng(31)

        def traj(ids):
            return trajlog.Trajectory(steps=tuple(
                trajlog.TrajectoryStep(state_id=i, time=float(k), energy=0.0)
                for k, i in enumerate(ids)
            ))

        coincident = Embedding(coords=np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0]]))
        assert metrics.avg_distortion(coincident, (traj([0, 1]),)) == 0.0
        line = Embedding(coords=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        assert metrics.avg_distortion(line, (traj([0, 1, 2]),)) == 0.5

        coords = rng.standard_normal((10, 2))
        trajectories = (traj([0, 3, 7, 2]), traj([5, 4, 1]))
        base = metrics.avg_distortion(Embedding(coords=coords), trajectories)
        moved = 2.5 * (coords @ random_rotation(rng, 2)) + np.array([1.0, -4.0])
        value = metrics.avg_distortion(Embedding(coords=moved), trajectories)
        assert abs(value - base) <= 1e-9

        for _ in range(50):
            n = int(rng.integers(15, 120))
            pts = rng.standard_normal((n, 2)) * rng.uniform(0.5, 2.0)
            eps = float(rng.uniform(0.1, 1.0))
            ms = int(rng.integers(1, 6))
            got = metrics.dbscan(pts, eps=eps, min_samples=ms)
            assert canonical_labels(got.labels) == canonical_labels(
                dbscan_reference(pts, eps, ms)
            )

        n = 9
        energies = rng.normal(0, 3, size=n)
        structures = structure_walk(rng, [8], n)
        analytic = np.mean([
            np.mean([abs(energies[i] - energies[j]) for j in range(n) if j != i])
            for i in range(n)
        ])
        tables = metrics.local_preservation(
            Embedding(coords=rng.standard_normal((n, 2))), energies,
            structures, [n - 1],
        )
        assert abs(tables[n - 1][0] - analytic) <= 1e-12


TOY_STATES = ["........", "(......)", "((....))", "(((..)))"]
TOY_ENERGIES = np.array([0.0, -1.0, -2.5, -6.0])


def _toy_system():
    """Four-state hairpin-folding chain; state 3 is the deep well."""
    beta = 1.0
    rate = 1e6  # 1/s, so sampled times land in the microsecond range
    n = 4
    rates = np.zeros((n, n))
    for i, j in [(0, 1), (1, 2), (2, 3)]:
        dd = TOY_ENERGIES[j] - TOY_ENERGIES[i]
        rates[i, j] = rate * min(1.0, math.exp(-beta * dd))
        rates[j, i] = rate * min(1.0, math.exp(-beta * -dd))
    return RateMatrix.from_off_diagonal(rates)


def test_end_to_end_smoke(tmp_path):
    with criterion("end-to-end smoke on the toy hairpin system", 60.0):
        rm = _toy_system()
        runs = ssa_ensemble(rm, np.array([1.0, 0, 0, 0]), stop=set(),
                            base_seed=7, n_runs=200, max_steps=120)
        lines = ["GCCTTGGC"]
        for k, run in enumerate(runs, start=1):
            for s, t in zip(run.states, run.times):
                lines.append(
                    f"[{k}] {TOY_STATES[s]} | {t * 1e6:.9f} | {TOY_ENERGIES[s]}"
                )
        log_text = "\n".join(lines) + "\n"

        parsed = trajlog.parse_log(log_text)
        assert len(parsed.space) == 4
        order = [parsed.space.state_index(dp) for dp in TOY_STATES]
        deep_well = order[3]
        # the deep well dominates the cumulative holding time
        assert np.argmax(parsed.space.cumulative_holding_times) == deep_well

        graphs = [to_graph(s) for s in parsed.space.states]
        features, _ = scattering.scatter_batch(graphs)

        g = mpt_graph(parsed.transitions, parsed.space)
        nbrs_mpt = mpt_knn(g, k=3)
        weights = WeightTable.from_space(parsed.space)
        nbrs_ged = ged_knn(list(parsed.space.states), k=3, mode="exact")

        ph = phate(features=features,
                   config=PhateConfig(n_neighbors=2, t=2, mds_max_iter=3000))
        cfg = StressConfig(delta=0.0004, epsilon=0.00004, init_coords=ph.coords,
                           max_iter=200)
        emb = stress_embed(4, nbrs_mpt, weights, nbrs_ged, cfg)

        distortion = metrics.avg_distortion(emb, parsed.trajectories)
        assert 0.0 <= distortion <= 1.0
        tables = metrics.local_preservation(
            emb, np.array(parsed.space.energies), list(parsed.space.states), [1, 3]
        )
        assert set(tables) == {1, 3}

        cr = metrics.dbscan(emb.coords, eps=metrics.elbow_eps(emb.coords, k=2),
                            min_samples=1)
        traps = metrics.kinetic_traps(cr, parsed.space)
        by_cluster = {t.cluster: t for t in traps}
        well_cluster = cr.labels[deep_well]
        assert by_cluster[well_cluster].state_id == deep_well

        doc = bundle.build_bundle("toy-hairpin", parsed, emb, clusters=cr,
                                  traps=traps)
        text = bundle.dumps_bundle(doc)
        out = tmp_path / "bundle.json"
        out.write_text(text)
        bundle.validate_bundle(json.loads(out.read_text()))
