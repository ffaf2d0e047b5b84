import json
from pathlib import Path

import numpy as np
import pytest

from strandscape.bundle import (
    build_bundle,
    dumps_bundle,
    loads_bundle,
    validate_bundle,
)
from strandscape.embedding import Embedding
from strandscape.errors import SchemaMismatch
from strandscape.metrics import ClusterResult, TrapRecord
from strandscape.trajlog import parse_log

FIXTURE = Path(__file__).parent / "fixtures" / "sample_fsm.log"


@pytest.fixture()
def parsed():
    return parse_log(FIXTURE.read_text())


@pytest.fixture()
def emb(parsed):
    rng = np.random.default_rng(0)
    return Embedding(coords=rng.standard_normal((len(parsed.space), 2)))


class TestBuild:
    def test_fields_present(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        validate_bundle(doc)
        assert doc["schema_version"] == "1"
        assert len(doc["states"]) == len(parsed.space)
        assert doc["meta"]["strands"][0]["sequence"].startswith("AGATC")

    def test_with_clusters(self, parsed, emb):
        n = len(parsed.space)
        cr = ClusterResult(labels=tuple([0] * n), state_ids=tuple(range(n)),
                           eps=0.5, min_samples=2)
        traps = [TrapRecord(cluster=0, state_id=3, dp=parsed.space.states[3].dp,
                            energy=parsed.space.energies[3], cumulative_time=1e-6)]
        doc = build_bundle("sample", parsed, emb, clusters=cr, traps=traps,
                           time_threshold=1e-9)
        validate_bundle(doc)
        assert doc["clusters"]["labels"] == [0] * n
        assert doc["clusters"]["traps"][0]["state_id"] == 3

    def test_row_count_mismatch(self, parsed):
        bad = Embedding(coords=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            build_bundle("sample", parsed, bad)


class TestValidation:
    def test_wrong_version(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        doc["schema_version"] = "2"
        with pytest.raises(SchemaMismatch):
            validate_bundle(doc)

    def test_dangling_trajectory_reference(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        doc["trajectories"][0]["state_ids"][0] = 999
        with pytest.raises(SchemaMismatch):
            validate_bundle(doc)

    def test_nonfinite_coordinates(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        doc["states"][0]["x"] = float("nan")
        with pytest.raises(SchemaMismatch):
            validate_bundle(doc)

    def test_null_coordinates(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        doc["states"][0]["y"] = None
        with pytest.raises(SchemaMismatch):
            validate_bundle(doc)

    def test_corrupt_json(self):
        with pytest.raises(SchemaMismatch):
            loads_bundle("{not json")


class TestRoundTrip:
    def test_byte_identical(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        text = dumps_bundle(doc)
        again = loads_bundle(text)
        assert dumps_bundle(again) == text

    def test_json_canonical(self, parsed, emb):
        doc = build_bundle("sample", parsed, emb)
        a = dumps_bundle(doc)
        b = dumps_bundle(json.loads(a))
        assert a == b
