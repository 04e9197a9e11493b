"""
测试高级 API 与 HTTP 推理服务
"""

import inspect

import numpy as np
import pytest
from fastapi.testclient import TestClient

from eegm2.api import EEGM2Toolkit, load_toolkit
from eegm2.arch import save_checkpoint
from eegm2.config import OptimConfig
from eegm2.exceptions import ShapeError


def tiny_toolkit(channels=2):
    toolkit = EEGM2Toolkit()
    toolkit.build(preset="tiny", in_channels=channels, dtype="float64")
    return toolkit


class TestEEGM2Toolkit:
    """测试 EEGM2Toolkit 类"""

    def setup_method(self):
        self.toolkit = tiny_toolkit()
        self.signal = np.random.default_rng(0).standard_normal((2, 32))

    def test_not_loaded(self):
        toolkit = EEGM2Toolkit()
        assert not toolkit.is_loaded
        with pytest.raises(FileNotFoundError):
            toolkit.reconstruct(self.signal)

    def test_reconstruct_single_window(self):
        result = self.toolkit.reconstruct(self.signal)
        assert result["reconstruction"].shape == (2, 32)
        assert result["acmse"] >= 0

    def test_reconstruct_batch(self):
        result = self.toolkit.reconstruct(np.stack([self.signal, self.signal]))
        assert result["reconstruction"].shape == (2, 2, 32)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            self.toolkit.reconstruct(np.zeros((3, 32)))

    def test_non_finite_rejected(self):
        signal = self.signal.copy()
        signal[0, 0] = np.inf
        with pytest.raises(ValueError):
            self.toolkit.reconstruct(signal)

    def test_represent(self):
        z = self.toolkit.represent(self.signal)
        assert z.shape == (1, 24, 9)
        assert self.toolkit.represent(self.signal, "encoder.stage1").shape == (1, 6, 9)

    def test_summary(self):
        summary = self.toolkit.summary()
        assert summary["variant"] == "full"
        assert summary["param_count"] == self.toolkit.model.num_parameters()
        assert summary["modules"]["total"] == summary["param_count"]
        assert summary["checkpoint"] is None

    def test_load_toolkit(self, tmp_path):
        path = save_checkpoint(tmp_path / "m.ckpt", self.toolkit.model, metadata={"note": "x"})
        loaded = load_toolkit(path)
        assert loaded.model.param_hash() == self.toolkit.model.param_hash()
        assert loaded.summary()["metadata"]["note"] == "x"

    def test_pretrain(self, small_batch):
        toolkit = tiny_toolkit(channels=4)
        result = toolkit.pretrain(small_batch.subset(range(8)), OptimConfig(epochs=1, batch_size=4))
        assert len(result.history) == 1


@pytest.fixture
def client(monkeypatch):
    monkeypatch.delenv("EEGM2_CHECKPOINT", raising=False)
    from app import app

    with TestClient(app) as test_client:
        yield test_client


class TestHTTPService:
    """测试推理服务接口"""

    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "healthy"
        assert body["model_loaded"] is False
        assert "X-Request-ID" in response.headers

    def test_model_missing(self, client):
        response = client.get("/api/v1/model/info")
        assert response.status_code == 404
        assert response.json()["path"] == "/api/v1/model/info"

    def test_reconstruct(self, client):
        client.app.state.toolkit = tiny_toolkit()
        signal = np.random.default_rng(0).standard_normal((2, 32)).tolist()
        response = client.post("/api/v1/model/reconstruct", json={"signal": signal})
        assert response.status_code == 200
        body = response.json()
        assert np.shape(body["reconstruction"]) == (2, 32)
        assert body["acmse"] >= 0
        assert client.get("/health").json()["model_loaded"] is True

    def test_reconstruct_channel_mismatch(self, client):
        client.app.state.toolkit = tiny_toolkit()
        response = client.post("/api/v1/model/reconstruct", json={"signal": [[0.0] * 32] * 3})
        assert response.status_code == 400
        assert response.json()["error"] == "形状错误"

    def test_reconstruct_ragged_signal(self, client):
        client.app.state.toolkit = tiny_toolkit()
        response = client.post("/api/v1/model/reconstruct", json={"signal": [[0.0] * 32, [0.0] * 31]})
        assert response.status_code == 422

    def test_represent(self, client):
        client.app.state.toolkit = tiny_toolkit()
        signal = np.zeros((3, 2, 32)).tolist()
        response = client.post("/api/v1/model/represent", json={"signal": signal})
        assert response.status_code == 200
        body = response.json()
        assert body["shape"] == [3, 24, 9]
        assert body["stat_names"][0] == "min"

    def test_model_info(self, client):
        client.app.state.toolkit = tiny_toolkit()
        body = client.get("/api/v1/model/info").json()
        assert body["variant"] == "full"
        assert body["config"]["in_channels"] == 2

    def test_param_count(self, client):
        response = client.post("/api/v1/bench/params",
                               json={"preset": "light", "variant": "s5", "in_channels": 16})
        assert response.status_code == 200
        body = response.json()
        assert body["variant"] == "s5"
        assert body["param_count"] > 0

    def test_compute_handlers_are_sync(self, client):
        """计算型接口声明为同步函数，由线程池执行，不阻塞事件循环"""
        endpoints = [route.endpoint for route in client.app.routes
                     if getattr(route, "path", "").startswith("/api/v1/")]
        assert len(endpoints) == 4
        assert not any(inspect.iscoroutinefunction(e) for e in endpoints)

    def test_param_count_bad_preset(self, client):
        response = client.post("/api/v1/bench/params", json={"preset": "huge"})
        assert response.status_code == 422


if __name__ == "__main__":
    pytest.main([__file__])
