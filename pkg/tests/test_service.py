"""HTTP service tests plus the CLI running in remote (thin-client) mode.

The FastAPI test client is an in-process httpx client, so the same object
drives both the raw endpoint tests and the CLI's --server code path.
"""

import dataclasses
import os
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from goalex import cli, explore, workbench
from goalex.config import default_config, serialize
from goalex.envs import ARM_BALL
from goalex.errors import NumericError
from goalex.render import load_image_dataset
from goalex.service import app as app_module
from goalex.vae import TrainConfig, VaeArchitecture

from test_workbench_cli import fabricate_run, read_bytes, tiny_config, write_config


@pytest.fixture()
def client():
    return TestClient(app_module.app, raise_server_exceptions=False)


def wait_for_job(client, job_id: str, timeout: float = 60.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/jobs/{job_id}").json()
        if body["state"] in ("done", "error"):
            return body
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish within {timeout}s")


# ---------------------------------------------------------------------------
# endpoints

class TestHealthAndValidate:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_validate_ok(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        response = client.post("/config/validate", json={"config_text": serialize(cfg)})
        assert response.status_code == 200
        body = response.json()
        assert body["valid"] is True
        assert body["name"] == "tiny"
        assert body["variant"] == ARM_BALL
        assert body["strategy"] == explore.RPE
        assert body["budget"] == 15
        assert body["seeds"] == [1, 2]

    def test_validate_bad_config(self, client):
        response = client.post("/config/validate", json={"config_text": "[exploration]\nbudget = -1\n"})
        assert response.status_code == 400
        body = response.json()
        assert body["error_code"] == 2
        assert "budget" in body["detail"]

    def test_validate_unknown_section(self, client):
        response = client.post("/config/validate", json={"config_text": "[mystery]\nx = 1\n"})
        assert response.status_code == 400
        assert response.json()["error_code"] == 2


class TestDatasetEndpoint:
    def test_sync_generation(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "api.gxim")
        response = client.post(
            "/datasets", json={"config_text": serialize(cfg), "out_path": out, "n_images": 6}
        )
        assert response.status_code == 200
        body = response.json()
        assert body == {"path": out, "count": 6}
        assert load_image_dataset(out).shape == (6, 16, 16)

    def test_seed_override_changes_bytes(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        a = str(tmp_path / "a.gxim")
        b = str(tmp_path / "b.gxim")
        client.post("/datasets", json={"config_text": serialize(cfg), "out_path": a, "n_images": 6})
        client.post(
            "/datasets",
            json={"config_text": serialize(cfg), "out_path": b, "n_images": 6, "seed_override": 11},
        )
        assert read_bytes(a) != read_bytes(b)

    def test_bad_config_maps_to_400(self, client):
        response = client.post("/datasets", json={"config_text": "[dataset]\nn_images = 0\n"})
        assert response.status_code == 400
        assert response.json()["error_code"] == 2


class TestRunJobs:
    def test_run_job_lifecycle(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "svc_run")
        response = client.post(
            "/runs", json={"config_text": serialize(cfg), "out_dir": out, "seed_override": 1}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["kind"] == "run"
        assert body["state"] in ("queued", "running")
        job = wait_for_job(client, body["job_id"])
        assert job["state"] == "done"
        assert job["error_code"] is None
        rows = job["result"]["summary"]
        assert rows == [{"strategy": explore.RPE, "seed": 1, "final_coverage": rows[0]["final_coverage"]}]
        assert os.path.exists(os.path.join(out, "seed_1", "history.csv"))
        assert workbench.read_summary(out) == [(explore.RPE, 1, rows[0]["final_coverage"])]

    def test_strategy_override(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        out = str(tmp_path / "svc_run")
        body = client.post(
            "/runs",
            json={
                "config_text": serialize(cfg),
                "out_dir": out,
                "seed_override": 1,
                "strategy_override": explore.RGE_EFR,
            },
        ).json()
        job = wait_for_job(client, body["job_id"])
        assert job["state"] == "done"
        assert workbench.read_manifest(out)["strategy"] == explore.RGE_EFR

    def test_bad_config_rejected_before_queueing(self, client):
        response = client.post("/runs", json={"config_text": "[exploration]\nbudget = 0\n"})
        assert response.status_code == 400
        assert response.json()["error_code"] == 2

    def test_job_failure_reports_error_code(self, client, tmp_path):
        # unwritable output directory -> the job itself fails with an I/O error
        cfg = tiny_config(tmp_path)
        body = client.post(
            "/runs", json={"config_text": serialize(cfg), "out_dir": "/dev/null/sub", "seed_override": 1}
        ).json()
        job = wait_for_job(client, body["job_id"])
        assert job["state"] == "error"
        assert job["error_code"] == 4
        assert job["detail"]

    def test_unknown_job_is_404(self, client):
        response = client.get("/jobs/doesnotexist")
        assert response.status_code == 404
        body = response.json()
        assert body["error_code"] == 4
        assert "doesnotexist" in body["detail"]


class TestTrainJobs:
    def test_train_job(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        workbench.gen_dataset(cfg)
        body = client.post(
            "/representations",
            json={"config_text": serialize(cfg), "out_dir": str(tmp_path / "svc_repr")},
        ).json()
        assert body["kind"] == "train-repr"
        job = wait_for_job(client, body["job_id"])
        assert job["state"] == "done"
        result = job["result"]
        assert os.path.exists(result["checkpoint"])
        assert os.path.exists(result["curve"])

    def test_missing_dataset_fails_with_io_code(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        body = client.post("/representations", json={"config_text": serialize(cfg)}).json()
        job = wait_for_job(client, body["job_id"])
        assert job["state"] == "error"
        assert job["error_code"] == 4


class TestCompareAndExport:
    def test_compare_endpoint(self, client, tmp_path):
        d = str(tmp_path / "runs")
        fabricate_run(d, ARM_BALL, [("RPE", 1, 10), ("RPE", 2, 20)], [[10], [20]])
        out = str(tmp_path / "agg")
        response = client.post("/compare", json={"run_dirs": [d], "out_dir": out})
        assert response.status_code == 200
        body = response.json()
        assert body["table"] == [
            {"strategy": "RPE", "mean_final_coverage": 15.0, "std_final_coverage": 5.0, "n": 2}
        ]
        assert os.path.join(out, "aggregate.csv") in body["files"]

    def test_compare_variant_mismatch_is_400(self, client, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        fabricate_run(a, "ArmBall", [("RPE", 1, 10)], [[10]])
        fabricate_run(b, "Arm2Balls", [("RPE", 1, 10)], [[10]])
        response = client.post("/compare", json={"run_dirs": [a, b]})
        assert response.status_code == 400
        assert response.json()["error_code"] == 2

    def test_export_endpoint(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        workbench.run_experiment(cfg, seed_override=1)
        history = os.path.join(cfg.output_dir, "seed_1", "history.csv")
        out = str(tmp_path / "exp")
        response = client.post("/export", json={"history_path": history, "out_dir": out})
        assert response.status_code == 200
        body = response.json()
        assert os.path.exists(body["scatter_path"])
        assert os.path.exists(body["curve_path"])

    def test_export_missing_history_is_500_io(self, client, tmp_path):
        response = client.post(
            "/export", json={"history_path": str(tmp_path / "no.csv"), "out_dir": str(tmp_path / "o")}
        )
        assert response.status_code == 500
        assert response.json()["error_code"] == 4


# ---------------------------------------------------------------------------
# CLI in remote mode (injected in-process client)

class TestCliRemote:
    def test_remote_gen_dataset(self, client, tmp_path, capsys):
        cfg = tiny_config(tmp_path)
        cfg_path = write_config(tmp_path, cfg)
        out = str(tmp_path / "remote.gxim")
        code = cli.main(
            ["gen-dataset", "--config", cfg_path, "--out", out, "--n-images", "5"], client=client
        )
        assert code == 0
        assert "wrote 5 images" in capsys.readouterr().out
        assert os.path.exists(out)

    def test_remote_matches_local_bytes(self, client, tmp_path):
        cfg = tiny_config(tmp_path)
        cfg_path = write_config(tmp_path, cfg)
        local = str(tmp_path / "local.gxim")
        remote = str(tmp_path / "remote.gxim")
        assert cli.main(["gen-dataset", "--config", cfg_path, "--out", local, "--n-images", "7"]) == 0
        assert (
            cli.main(
                ["gen-dataset", "--config", cfg_path, "--out", remote, "--n-images", "7"], client=client
            )
            == 0
        )
        assert read_bytes(local) == read_bytes(remote)

    def test_remote_run(self, client, tmp_path, capsys):
        cfg = tiny_config(tmp_path)
        cfg_path = write_config(tmp_path, cfg)
        out = str(tmp_path / "remote_run")
        code = cli.main(["run", "--config", cfg_path, "--out", out, "--seed-override", "1"], client=client)
        assert code == 0
        assert "RPE seed 1: final coverage" in capsys.readouterr().out
        assert os.path.exists(os.path.join(out, "seed_1", "curve.csv"))

    def test_remote_train_repr(self, client, tmp_path, capsys):
        cfg = tiny_config(tmp_path)
        cfg_path = write_config(tmp_path, cfg)
        workbench.gen_dataset(cfg)
        code = cli.main(["train-repr", "--config", cfg_path], client=client)
        assert code == 0
        assert "checkpoint:" in capsys.readouterr().out

    def test_remote_compare(self, client, tmp_path, capsys):
        d = str(tmp_path / "runs")
        fabricate_run(d, ARM_BALL, [("RPE", 1, 10), ("RPE", 2, 20)], [[10], [20]])
        code = cli.main(["compare", d], client=client)
        assert code == 0
        assert "RPE: mean 15.00 std 5.00 (n=2)" in capsys.readouterr().out

    def test_remote_export(self, client, tmp_path, capsys):
        cfg = tiny_config(tmp_path)
        workbench.run_experiment(cfg, seed_override=1)
        history = os.path.join(cfg.output_dir, "seed_1", "history.csv")
        code = cli.main(["export", history, "--out", str(tmp_path / "e")], client=client)
        assert code == 0
        assert "scatter:" in capsys.readouterr().out

    def test_remote_config_error_maps_to_2(self, client, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[exploration]\nbudget = 0\n")
        code = cli.main(["run", "--config", str(bad)], client=client)
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_remote_job_io_error_maps_to_4(self, client, tmp_path, capsys):
        cfg_path = write_config(tmp_path, tiny_config(tmp_path))
        code = cli.main(
            ["run", "--config", cfg_path, "--out", "/dev/null/sub", "--seed-override", "1"],
            client=client,
        )
        assert code == 4
        assert "io error" in capsys.readouterr().err

    def test_remote_numeric_error_maps_to_3(self, client, tmp_path, capsys, monkeypatch):
        cfg_path = write_config(tmp_path, tiny_config(tmp_path))

        def explode(*args, **kwargs):
            raise NumericError("synthetic divergence")

        monkeypatch.setattr(app_module.workbench, "run_experiment", explode)
        code = cli.main(["run", "--config", cfg_path, "--seed-override", "1"], client=client)
        assert code == 3
        assert "numeric error" in capsys.readouterr().err

    def test_remote_missing_export_maps_to_4(self, client, tmp_path):
        code = cli.main(
            ["export", str(tmp_path / "no.csv"), "--out", str(tmp_path / "o")], client=client
        )
        assert code == 4
