"""Smoke test for the phasediff_py extension module.

Build and install it first:

    maturin build --release -m crates/py/Cargo.toml --features extension-module
    pip install target/wheels/phasediff_py-*.whl
"""

import numpy as np

import phasediff_py as pd


def main():
    params = pd.ModelParams(a=1.0, b=1.0)
    grid = pd.PhaseGrid(64, 128, -8.0, 8.0, -12.0, 12.0)
    assert grid.shape == (64, 128)

    psi = pd.ConfigWave.gaussian(64, -8.0, 8.0, center=0.5, sigma=0.8, momentum=1.0)
    phi = pd.lift(psi, grid, params)
    assert pd.kernel_residual(phi, params) < 1e-6
    back = pd.project(phi, params)
    assert back.distance(psi) / psi.norm() < 1e-6

    rho = np.asarray(pd.phase_density(psi, grid, params))
    assert rho.min() >= 0.0
    assert abs(rho.sum() * grid.dx * grid.dp - 1.0) < 1e-6

    spec = pd.diffusion_spectrum(params, 0.0, 3)
    assert abs(spec["gap"] - 2.0) < 1e-6

    relaxed = pd.evolve_diffusion(phi, 1.0, 0.05, params)
    assert abs(relaxed.norm() / phi.norm() - 1.0) < 1e-6

    ham = pd.Hamiltonian.harmonic(1.0, 1.0)
    moved = pd.evolve_full(phi, ham, params, 0.5, 0.05)
    assert moved.norm() <= phi.norm() * (1 + 1e-9)
    values = np.asarray(moved.values())
    assert values.shape == (64, 128) and np.iscomplexobj(values)

    h1 = pd.apply_h_approx(psi, pd.Potential.harmonic(1.0), params)
    h2 = pd.apply_h_integral(psi, ham, params)
    print(f"operator gap {h1.distance(h2) / psi.norm():.3e}")

    try:
        pd.evolve_diffusion(phi, 1.0, 0.5, params)
    except ValueError as e:
        assert "step too large" in str(e)
    else:
        raise AssertionError("oversized step accepted")

    report = pd.physical_report(1.0)
    assert abs(report["relaxation_time"] / 7.638e-12 - 1.0) < 1e-3

    print(f"phasediff_py {pd.__version__}: ok")


if __name__ == "__main__":
    main()
