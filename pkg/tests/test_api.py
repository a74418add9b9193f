import pytest
from fastapi.testclient import TestClient

from main import app


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def setting1_csv(client):
    response = client.post("/datasets/simulate", json={"setting": "1", "n": 80, "seed": 3})
    return response.json()["csv"]


def test_root_and_health(client):
    assert client.get("/").json()["status"] == "running"
    assert client.get("/health").json() == {"status": "healthy"}


def test_list_settings(client):
    body = client.get("/settings/").json()
    assert body["count"] == 5
    assert [item["setting"] for item in body["settings"]] == ["1", "2low", "2high", "3", "4"]


def test_truth(client):
    body = client.get("/settings/1/truth").json()
    assert body["truth"] == {"intercept": 0.0, "X1": 0.4}
    assert client.get("/settings/9/truth").status_code == 422


def test_simulate(client):
    response = client.post("/datasets/simulate", json={"setting": "3", "n": 40, "seed": 3})
    assert response.status_code == 200
    body = response.json()
    assert body["layout"] == "wide"
    assert body["n"] == 40
    assert body["csv"].splitlines()[0] == "time,event,X1,X2"
    assert body["missing_fraction"]["X2"] == 0.0


def test_simulate_rejects_small_n(client):
    assert client.post("/datasets/simulate", json={"setting": "1", "n": 5}).status_code == 422


def test_analyze_inline_csv(client, setting1_csv):
    response = client.post("/intervals/analyze", json={
        "csv": setting1_csv, "method": "no-boot", "M": 3, "engine": "abb",
    })
    assert response.status_code == 200
    body = response.json()
    assert body["coordinates"] == ["intercept", "X1"]
    assert body["engine"] == "abb"
    assert all(low <= up for low, up in zip(body["lower"], body["upper"]))


def test_analyze_generated_dataset(client):
    response = client.post("/intervals/analyze", json={
        "setting": "1", "n": 60, "method": "boot-mi-t", "M": 2, "B": 5, "seed": 9,
    })
    assert response.status_code == 200
    assert response.json()["metadata"]["assumes_normality"] is True


def test_analyze_needs_exactly_one_source(client, setting1_csv):
    assert client.post("/intervals/analyze", json={"csv": setting1_csv, "setting": "1"}).status_code == 422
    assert client.post("/intervals/analyze", json={"method": "boot-mi"}).status_code == 422


def test_analyze_rejects_mismatched_estimator(client, setting1_csv):
    response = client.post("/intervals/analyze", json={"csv": setting1_csv, "estimator": "seqg", "method": "no-boot"})
    assert response.status_code == 400
    assert "longitudinal" in response.json()["detail"]


def test_analyze_rejects_small_bootstrap(client, setting1_csv):
    response = client.post("/intervals/analyze", json={"csv": setting1_csv, "method": "boot-mi", "B": 10})
    assert response.status_code == 400


def test_study_cell(client, tmp_path):
    config = {"setting": "1", "R": 2, "n": 60, "M": 2, "B": 20, "alpha": 0.05,
              "methods": ["boot-mi"], "results_dir": str(tmp_path)}
    response = client.post("/studies/cell", json={"config": config, "method": "boot-mi"})
    assert response.status_code == 200
    body = response.json()
    assert "runs" not in body
    assert body["R"] == 2
    assert [row["coord"] for row in body["coordinates"]] == ["intercept", "X1"]
