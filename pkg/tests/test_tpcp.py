import math

import numpy as np
import pytest
from pydantic import ValidationError

from algebra.tensor import Tensor3, l1_norm, relative_error
from algebra.transforms import build_transform, mproduct
from algebra.tsvd import tnn
from errors import NumericError, ShapeError
from solvers import tpcp
from solvers.tpcp import TpcpConfig, default_lambda, objective, tpcp_solve
from tools.metrics import LabelVolume, support_f1


class TestDefaultLambda:
    def test_examples(self):
        assert default_lambda((512, 512, 5)) == pytest.approx(1.0 / math.sqrt(2560))
        assert default_lambda((512, 512, 5)) == pytest.approx(0.019764, abs=1e-6)
        assert default_lambda((1, 1, 1)) == 1.0
        assert default_lambda((64, 32, 30)) == pytest.approx(0.022822, abs=1e-6)

    def test_auto_resolves_per_dims(self):
        cfg = TpcpConfig(transform=build_transform("dct", 5))
        assert cfg.resolve_lambda((64, 32, 30)) == default_lambda((64, 32, 30))
        fixed = TpcpConfig(transform=build_transform("dct", 5), lambda_=0.3)
        assert fixed.resolve_lambda((64, 32, 30)) == 0.3


class TestConfig:
    def test_defaults(self):
        cfg = TpcpConfig(transform=build_transform("dct", 3))
        assert (cfg.mu0, cfg.mu_max, cfg.rho, cfg.eps, cfg.max_iters) == (1e-3, 1e10, 1.1, 1e-8, 500)
        assert cfg.lambda_ == "auto"

    @pytest.mark.parametrize(
        "overrides",
        [{"rho": 1.0}, {"eps": 0.0}, {"mu0": 1.0, "mu_max": 0.1}, {"max_iters": 0}, {"lambda_": -1.0}],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            TpcpConfig(transform=build_transform("dct", 3), **overrides)

    def test_from_settings(self, settings):
        cfg = TpcpConfig.from_settings(settings, build_transform("dct", 3), max_iters=20, lambda_=None)
        assert cfg.max_iters == 20
        assert cfg.lambda_ == "auto"
        assert cfg.mu0 == settings.TPCP_MU0

    def test_describe_resolves_lambda(self):
        cfg = TpcpConfig(transform=build_transform("dft", 3))
        described = cfg.describe((4, 4, 3))
        assert described["transform"] == "fft"
        assert described["lambda"] == pytest.approx(default_lambda((4, 4, 3)))


class TestSolve:
    def test_zero_input(self):
        cfg = TpcpConfig(transform=build_transform("dct", 4))
        result = tpcp_solve(Tensor3.zeros((5, 5, 4)), cfg)
        assert result.converged
        assert result.iterations == 1
        assert np.all(result.low_rank.data == 0.0)
        assert np.all(result.sparse.data == 0.0)

    def test_length_mismatch(self):
        cfg = TpcpConfig(transform=build_transform("dct", 4))
        with pytest.raises(ShapeError):
            tpcp_solve(Tensor3.zeros((2, 2, 3)), cfg)

    def test_low_rank_input_has_no_sparse_part(self, low_rank_tensor):
        x, t = low_rank_tensor(64, 64, 10, 2, "dct")
        result = tpcp_solve(x, TpcpConfig(transform=t))
        assert result.converged
        assert l1_norm(result.sparse) / l1_norm(x) < 1e-3
        assert relative_error(result.low_rank, x) < 1e-3

    def test_trace_properties(self, rng, low_rank_tensor):
        low, t = low_rank_tensor(10, 10, 6, 1, "dct")
        spikes = np.zeros(low.size)
        spikes[rng.choice(low.size, size=12, replace=False)] = 10.0
        x = low + Tensor3.from_flat(spikes, low.dims)
        result = tpcp_solve(x, TpcpConfig(transform=t))

        mus = [rec.mu for rec in result.trace]
        assert all(b >= a for a, b in zip(mus, mus[1:]))
        assert max(mus) <= 1e10
        assert len(result.trace) == result.iterations

        assert result.converged
        last = result.trace[-1]
        assert max(last.primal_residual, last.delta_low_rank, last.delta_sparse) < 1e-8
        np.testing.assert_allclose((result.low_rank + result.sparse).data, x.data, atol=last.primal_residual + 1e-12)

        lam = result.resolved_lambda
        assert result.objective == pytest.approx(objective(t, result.low_rank, result.sparse, lam), rel=1e-9)
        assert result.objective <= tnn(t, x) + 1e-6

    def test_mu_is_capped(self, random_tensor):
        t = build_transform("dct", 3)
        cfg = TpcpConfig(transform=t, mu0=1.0, mu_max=2.0, rho=1.5, max_iters=10)
        result = tpcp_solve(random_tensor((4, 4, 3)), cfg)
        assert [rec.mu for rec in result.trace][:4] == [1.0, 1.5, 2.0, 2.0]

    def test_non_convergence_is_reported(self, random_tensor):
        cfg = TpcpConfig(transform=build_transform("dct", 4), max_iters=3)
        result = tpcp_solve(random_tensor((6, 6, 4)), cfg)
        assert not result.converged
        assert result.iterations == 3
        assert result.summary()["converged"] is False

    def test_deterministic(self, random_tensor):
        x = random_tensor((8, 8, 5))
        cfg = TpcpConfig(transform=build_transform("dft", 5), max_iters=40)
        first, second = tpcp_solve(x, cfg), tpcp_solve(x, cfg)
        assert first.trace == second.trace
        np.testing.assert_array_equal(first.low_rank.data, second.low_rank.data)

    def test_progress_callback(self, random_tensor):
        seen = []
        cfg = TpcpConfig(transform=build_transform("dct", 3), max_iters=5)
        tpcp_solve(random_tensor((3, 3, 3)), cfg, progress=lambda i, rec: seen.append(i))
        assert seen == [1, 2, 3, 4, 5]

    def test_diverging_sparse_iterate_stops_the_run(self, monkeypatch, random_tensor):
        monkeypatch.setattr(tpcp, "shrink_array", lambda w, tau: np.full_like(w, np.inf))
        seen = []
        cfg = TpcpConfig(transform=build_transform("dct", 3), max_iters=5)
        with pytest.raises(NumericError, match="iteration 1"):
            tpcp_solve(random_tensor((3, 3, 3)), cfg, progress=lambda i, rec: seen.append(i))
        assert seen == []


@pytest.mark.slow
def test_exact_recovery():
    """L0 = A ★ B (rank 5) plus 5% ±1 corruption is recovered on at least 9 of 10 seeds."""
    dims = (64, 64, 30)
    t = build_transform("dct", dims[2])
    cfg = TpcpConfig(transform=t)
    successes = 0
    for seed in range(10):
        gen = np.random.default_rng(seed)
        a = Tensor3(gen.standard_normal((64, 5, 30)))
        b = Tensor3(gen.standard_normal((5, 64, 30)))
        low = mproduct(t, a, b)
        size = int(np.prod(dims))
        sparse = np.zeros(size)
        idx = gen.choice(size, size=int(0.05 * size), replace=False)
        sparse[idx] = gen.choice([-1.0, 1.0], size=idx.size)
        truth = Tensor3.from_flat(sparse, dims)

        result = tpcp_solve(low + truth, cfg)
        mask = LabelVolume(truth.data != 0)
        if relative_error(result.low_rank, low) < 1e-3 and support_f1(result.sparse, mask, 1e-3) > 0.95:
            successes += 1
    assert successes >= 9
