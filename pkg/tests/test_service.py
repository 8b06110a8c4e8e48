import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from cosynth.corpus import load_manifest
from cosynth.curation import CurationStore
from cosynth.paster import SynthesisConfig, run_pipeline
from cosynth.service import create_app
from conftest import build_corpus_on_disk


@pytest.fixture
def client(tmp_path):
    src = build_corpus_on_disk(tmp_path / "src", {"a": 3, "b": 3}, size=64)
    cfg = SynthesisConfig(seed=13, samples_per_canvas=2, supplement_factor=1)
    run_pipeline(load_manifest(src), cfg, tmp_path / "out", min_group_size=1)
    store = CurationStore(tmp_path / "out")
    return TestClient(create_app(store))


def _png(resp):
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    return np.asarray(Image.open(io.BytesIO(resp.content)))


class TestReadEndpoints:
    def test_groups_counts(self, client):
        groups = client.get("/api/groups").json()
        assert [g["label"] for g in groups] == ["a", "b"]
        assert all(g["pending"] == 6 and g["accepted"] == 0 for g in groups)

    def test_candidates_pagination(self, client):
        page0 = client.get("/api/candidates", params={"page": 0, "page_size": 3}).json()
        page1 = client.get("/api/candidates", params={"page": 1, "page_size": 3}).json()
        assert len(page0) == 3 and len(page1) == 3
        assert page0[0]["sample_id"] != page1[0]["sample_id"]
        assert page0[0]["paths"]["overlay"].endswith("/overlay")

    def test_unknown_group_is_404(self, client):
        resp = client.get("/api/candidates", params={"group": "ghost"})
        assert resp.status_code == 404
        assert "ghost" in resp.json()["detail"]

    def test_sample_rasters_served_as_png(self, client):
        cand = client.get("/api/candidates", params={"page_size": 1}).json()[0]
        sid = cand["sample_id"]
        image = _png(client.get(f"/api/sample/{sid}/image"))
        mask = _png(client.get(f"/api/sample/{sid}/mask"))
        overlay = _png(client.get(f"/api/sample/{sid}/overlay"))
        assert image.shape[:2] == mask.shape[:2] == overlay.shape[:2]
        assert set(np.unique(mask)) <= {0, 255}
        assert not np.array_equal(overlay, image)  # tint and outline applied

    def test_unknown_sample_is_404(self, client):
        assert client.get("/api/sample/ghost/image").status_code == 404

    def test_stats_shape(self, client):
        stats = client.get("/api/stats").json()
        assert stats["synthesized"] == 12
        assert stats["pending"] == 12
        assert stats["rejection_rate"] == 0.0
        assert stats["run"]["seed"] == 13


class TestVerdictEndpoint:
    def test_accept_updates_stats(self, client):
        cand = client.get("/api/candidates", params={"page_size": 1}).json()[0]
        resp = client.post(
            "/api/verdict", json={"sample_id": cand["sample_id"], "decision": "accept"}
        )
        assert resp.status_code == 200
        assert resp.json() == {"status": "accepted", "replacement_id": None}
        stats = client.get("/api/stats").json()
        assert stats["accepted"] == 1 and stats["pending"] == 11

    def test_reject_returns_replacement_card(self, client):
        cand = client.get("/api/candidates", params={"page_size": 1}).json()[0]
        resp = client.post(
            "/api/verdict",
            json={"sample_id": cand["sample_id"], "decision": "reject", "reason": "occluded"},
        )
        body = resp.json()
        assert body["status"] == "rejected"
        rid = body["replacement_id"]
        assert rid and body["replacement"]["sample_id"] == rid
        assert body["replacement"]["status"] == "pending"
        assert body["replacement"]["provenance"]["attempt"] > cand["provenance"]["attempt"]
        # the queue and stats see the replacement immediately
        stats = client.get("/api/stats").json()
        assert stats["pending"] == 12  # one left, one joined
        assert stats["rejected"] == 1
        overlay = client.get(f"/api/sample/{rid}/overlay")
        assert overlay.status_code == 200

    def test_unknown_sample_is_404(self, client):
        resp = client.post("/api/verdict", json={"sample_id": "ghost", "decision": "accept"})
        assert resp.status_code == 404

    def test_bad_decision_is_400(self, client):
        cand = client.get("/api/candidates", params={"page_size": 1}).json()[0]
        resp = client.post(
            "/api/verdict", json={"sample_id": cand["sample_id"], "decision": "maybe"}
        )
        assert resp.status_code == 400

    def test_relabel_via_http(self, client):
        cand = client.get("/api/candidates", params={"page_size": 1}).json()[0]
        resp = client.post(
            "/api/verdict",
            json={"sample_id": cand["sample_id"], "decision": "relabel", "new_label": "okapi"},
        )
        assert resp.status_code == 200
        assert resp.json()["relabeled_to"] == "okapi"
        stats = client.get("/api/stats").json()
        assert "okapi" in stats["label_overrides"].values()


class TestStaticUi:
    def test_ui_mounted_when_dir_given(self, tmp_path):
        src = build_corpus_on_disk(tmp_path / "src", {"a": 2, "b": 2}, size=64)
        run_pipeline(
            load_manifest(src),
            SynthesisConfig(seed=1, samples_per_canvas=1, supplement_factor=0),
            tmp_path / "out",
            min_group_size=1,
        )
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>review</body></html>")
        client = TestClient(create_app(CurationStore(tmp_path / "out"), ui_dir=ui))
        resp = client.get("/ui/")
        assert resp.status_code == 200
        assert "review" in resp.text
