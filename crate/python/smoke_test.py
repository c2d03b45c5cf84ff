"""Smoke test for the dpols_py extension.

Build first:  maturin develop -m crates/python/Cargo.toml
"""
import math

import dpols_py as dp


def main():
    b = dp.PrivacyBudget(1.0, 1e-6, 1e-7)
    assert b.epsilon == 1.0 and "PrivacyBudget" in repr(b)

    try:
        dp.PrivacyBudget(-1.0, 1e-6, 1e-7)
    except ValueError:
        pass
    else:
        raise AssertionError("negative epsilon accepted")

    gamma = dp.calibrate_gamma(1.0, 1e-6, 64)
    assert gamma > 2.5
    assert dp.mixing_epsilon(gamma / 8.0, gamma, 64, 1e-6) <= 1.0 + 1e-6
    g, sigma, tau, eta = dp.theorem1_noise(1.0, 1e-6, 64, 3, 1.0, 1e-7)
    assert min(g, sigma, tau, eta) > 0
    assert dp.analytic_gaussian_sigma(1.0, 1.0, 1e-5) > 0

    x, y = dp.synth_gaussian(500, 4, noise_sd=0.1, seed=3)
    assert len(x) == 500 and len(x[0]) == 4
    for method in dp.METHODS:
        out = dp.fit(method, x, y, 2.0, seed=1)
        assert out["method"] == method
        assert len(out["theta"]) == 4
        assert all(math.isfinite(t) for t in out["theta"])
        mse = sum((sum(a * t for a, t in zip(row, out["theta"])) - v) ** 2 for row, v in zip(x, y)) / len(y)
        print(f"{method:11s} train_mse={mse:.5f}")

    again = dp.fit("ihm", x, y, 2.0, seed=1)
    assert again["theta"] == dp.fit("ihm", x, y, 2.0, seed=1)["theta"]

    try:
        dp.fit("ols", x, y, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")

    xm, _ = dp.synth_mlp_lowrank(256, out_dim=16, seed=2)
    assert len(xm[0]) == 16
    print("smoke test OK")


if __name__ == "__main__":
    main()
