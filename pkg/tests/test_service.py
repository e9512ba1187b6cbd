"""HTTP service: endpoint behavior, registries, error mapping."""

import json

import pytest
from fastapi.testclient import TestClient

from abacus.cli import main
from abacus.graph import graph_to_dict
from abacus.service.app import create_app

from conftest import make_graph, node


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def chain_doc(conv_relu_chain):
    return graph_to_dict(conv_relu_chain)


CFG = {"batch_size": 32, "learning_rate": 0.01, "epochs": 2, "optimizer": "adam"}


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_validate_endpoint(client, chain_doc):
    r = client.post("/validate", json=chain_doc)
    assert r.status_code == 200
    assert r.json() == {"ok": True, "issues": []}


def test_validate_reports_issues(client):
    doc = graph_to_dict(make_graph([node(0, "ReLU")], [[0, 99]]))
    body = client.post("/validate", json=doc).json()
    assert not body["ok"]
    assert body["issues"]


def test_nsm_endpoint(client, chain_doc):
    body = client.post("/nsm", json=chain_doc).json()
    assert len(body["operators"]) == 12
    assert sum(sum(row) for row in body["counts"]) == 1


def test_features_endpoint(client, chain_doc):
    body = client.post("/features", json={"graph": chain_doc, "config": CFG}).json()
    assert len(body["names"]) == len(body["values"]) == 154
    assert body["values"][0] == 32.0  # batch_size slot


def test_features_rejects_cyclic_graph(client):
    doc = graph_to_dict(make_graph([node(0, "ReLU"), node(1, "ReLU")],
                                   [[0, 1], [1, 0]]))
    r = client.post("/features", json={"graph": doc, "config": CFG})
    assert r.status_code == 422
    assert "cycle" in r.json()["detail"]


def test_generate_endpoint(client):
    r = client.post("/generate", json={"seed": 3, "count": 2,
                                       "configs_per_graph": 2,
                                       "node_count": [5, 12]})
    body = r.json()
    assert len(body["graphs"]) == 2
    assert body["points"] == 4
    assert body["dataset_csv"].startswith("graph_id,machine_id,framework_id,")
    # same seed -> same payload
    again = client.post("/generate", json={"seed": 3, "count": 2,
                                           "configs_per_graph": 2,
                                           "node_count": [5, 12]}).json()
    assert again == body


def test_schedule_endpoint(client):
    jobs = [{"id": f"j{i}", "time_s": t, "mem_mib": 100.0}
            for i, t in enumerate([2.0, 2.0, 3.0])]
    body = client.post("/schedule", json={"jobs": jobs,
                                          "capacities": [512, 512],
                                          "seed": 0}).json()
    assert body["makespan"] == 4.0
    assert sorted(body["assignment"]) == ["j0", "j1", "j2"]
    assert len(body["per_machine_time"]) == 2


def test_schedule_needs_machine_spec(client):
    jobs = [{"id": "a", "time_s": 1.0, "mem_mib": 1.0}]
    r = client.post("/schedule", json={"jobs": jobs, "seed": 0})
    assert r.status_code == 422


def test_schedule_infeasible_is_422(client):
    jobs = [{"id": "a", "time_s": 1.0, "mem_mib": 9999.0}]
    r = client.post("/schedule", json={"jobs": jobs, "capacities": [64],
                                       "seed": 0})
    assert r.status_code == 422


def test_predictor_registry_and_predict(client, tmp_path, chain_doc, capsys):
    out = tmp_path / "data"
    main(["generate", "--out", str(out), "--seed", "11", "--count", "6",
          "--configs", "3", "--nodes", "5,20"])
    pred_path = tmp_path / "p.bin"
    main(["train", "--data", str(out / "dataset.csv"), "--out", str(pred_path),
          "--seed", "7"])
    capsys.readouterr()

    r = client.post("/predictors", json={"name": "zoo", "path": str(pred_path)})
    assert r.status_code == 200
    assert r.json()["structural"] == "nsm"

    listed = client.get("/predictors").json()
    assert [p["name"] for p in listed] == ["zoo"]

    r = client.post("/predict", json={"predictor": "zoo", "graph": chain_doc,
                                      "config": CFG})
    assert r.status_code == 200
    body = r.json()
    assert body["time_s"] > 0 and body["mem_mib"] > 0

    # identical request, identical answer
    again = client.post("/predict", json={"predictor": "zoo",
                                          "graph": chain_doc,
                                          "config": CFG}).json()
    assert again == body


def test_predict_unknown_predictor_is_404(client, chain_doc):
    r = client.post("/predict", json={"predictor": "ghost", "graph": chain_doc,
                                      "config": CFG})
    assert r.status_code == 404


def test_register_missing_file_is_422(client):
    r = client.post("/predictors", json={"name": "x", "path": "/no/such.bin"})
    assert r.status_code == 422


def test_embeddings_registry(client, tmp_path, capsys):
    out = tmp_path / "data"
    main(["generate", "--out", str(out), "--seed", "4", "--count", "5",
          "--nodes", "5,15"])
    emb_path = tmp_path / "emb.json"
    main(["embed", "--data", str(out), "--out", str(emb_path), "--seed", "5",
          "--dims", "8", "--epochs", "2"])
    capsys.readouterr()

    r = client.post("/embeddings", json={"name": "w", "path": str(emb_path)})
    assert r.status_code == 200
    assert r.json()["dims"] == 8

    doc = json.loads((sorted(out.glob("*.graph"))[0]).read_text())
    r = client.post("/features", json={"graph": doc, "config": CFG,
                                       "structural": "embedding",
                                       "embeddings": "w", "graph_id": "g00000"})
    assert r.status_code == 200
    assert len(r.json()["values"]) == 18

    r = client.post("/features", json={"graph": doc, "config": CFG,
                                       "structural": "embedding",
                                       "embeddings": "ghost"})
    assert r.status_code == 404


def test_bad_request_shape_is_422(client):
    r = client.post("/validate", json={"nodes": []})
    assert r.status_code == 422
