import pytest

from yangfeldman_mcp.api.errors import ConfigError
from yangfeldman_mcp.api.experiments import (
    IDENTITY_CHECKS,
    default_points,
    run_field_expansion,
    run_identity_suite,
    run_nonquasifree_demo,
    run_reconstruction_demo,
    run_tree_listing,
    run_wightman,
)
from yangfeldman_mcp.api.types import ExperimentConfig, LatticeConfig, RunConfig, TheoryConfig


def make_config(lattice=None, theory=None, run=None):
    return ExperimentConfig(
        lattice=lattice or LatticeConfig(nt=4, nx=4, dt=0.5, dx=1.0, mass=1.0),
        theory=theory or TheoryConfig(),
        run=run or RunConfig(),
    )


def test_exact_identity_suite_passes():
    config = make_config(theory=TheoryConfig(p=3), run=RunConfig(backend="exact", order=1, instances=3, seed=2))
    report = run_identity_suite(config)
    names = [check["name"] for check in report["checks"]]
    assert names == list(IDENTITY_CHECKS)
    assert report["backend"] == "exact"
    assert report["tolerance"] == 0.0
    failing = [check for check in report["checks"] if not check["pass"]]
    assert not failing
    assert report["pass"]
    control = report["checks"][-1]
    assert control["negative_control"]
    assert control["max_residual"] > 0


def test_float_identity_suite_passes():
    config = make_config(run=RunConfig(backend="float", order=1, instances=4, seed=5))
    report = run_identity_suite(config)
    assert report["pass"], [check for check in report["checks"] if not check["pass"]]
    by_name = {check["name"]: check for check in report["checks"]}
    assert by_name["power_vs_retarded"]["instances"] == 4
    # two spectral residuals plus one diagonal residual per vector
    assert by_name["positivity"]["instances"] == 2 + 5


def test_identity_selection_accepts_hyphens():
    config = make_config(theory=TheoryConfig(p=3), run=RunConfig(backend="exact", identity="out-ccr, glz", instances=2))
    report = run_identity_suite(config)
    assert [check["name"] for check in report["checks"]] == ["out_ccr", "glz"]
    assert all(check["instances"] >= 1 for check in report["checks"])


@pytest.mark.acceptance
def test_commutator_identities_over_many_instances():
    lattice = LatticeConfig(nt=10, nx=6, dt=0.5, dx=1.0, mass=1.0)
    run = RunConfig(backend="exact", order=1, instances=200, seed=3, identity="glz,retrecursion,retpull,commutator_chains")
    report = run_identity_suite(make_config(lattice=lattice, theory=TheoryConfig(p=3), run=run))
    assert report["pass"]
    assert all(check["max_residual"] == 0.0 for check in report["checks"])
    by_name = {check["name"]: check["instances"] for check in report["checks"]}
    assert by_name["glz"] == 200
    assert by_name["retpull"] == 400


def test_unknown_identity_is_rejected():
    config = make_config(run=RunConfig(identity="glz,causality"))
    with pytest.raises(ConfigError):
        run_identity_suite(config)


def test_wightman_report_sums_orders():
    config = make_config(theory=TheoryConfig(p=4, coupling=0.5, sigma_max=1))
    report = run_wightman(config, ["loc", "in"], [13, 2])
    assert report["experiment"] == "wightman"
    assert [entry["order"] for entry in report["orders"]] == [0, 1]
    expected = sum((-0.5) ** e["order"] * (e["value_re"] + 1j * e["value_im"]) for e in report["orders"])
    assert report["total"]["re"] == pytest.approx(expected.real)
    assert report["total"]["im"] == pytest.approx(expected.imag)
    assert len(report["config_hash"]) == 64
    assert report["point_weights"] == pytest.approx([0.5, 0.5])


def test_wightman_breakdown_and_validation():
    config = make_config()
    report = run_wightman(config, ["out"] * 4, [12, 13, 14, 15], breakdown=True, order=1)
    (entry,) = report["orders"]
    assert entry["graphs_enumerated"] == 24
    assert len(entry["per_graph"]) == 24
    with pytest.raises(ConfigError):
        run_wightman(config, ["in", "in"], [0, 99])
    with pytest.raises(ConfigError):
        run_wightman(config, ["in", "mid"], [0, 1])


def test_tree_listing():
    report = run_tree_listing("loc", 2, 4, dot=True)
    assert report["count"] == 3
    assert len(report["trees"]) == 3
    assert all(tree["trunk"] == "Gr" and tree["dot"].startswith("digraph") for tree in report["trees"])


def test_field_expansion():
    config = make_config(theory=TheoryConfig(p=3, sigma_max=2))
    report = run_field_expansion(config, "out", 14)
    assert [entry["order"] for entry in report["orders"]] == [0, 1, 2]
    assert report["orders"][0]["terms"] == [{"sites": [14], "coefficient": {"re": 1.0, "im": 0.0}}]
    with pytest.raises(ConfigError):
        run_field_expansion(config, "mid", 14)
    with pytest.raises(ConfigError):
        run_field_expansion(config, "out", 16)


def test_default_points_lie_on_the_last_slice():
    from yangfeldman_mcp.api.lattice import build_lattice

    lattice = build_lattice(LatticeConfig(nt=8, nx=4, dt=0.5, dx=1.0))
    assert default_points(lattice) == [28, 29, 30, 31]


@pytest.fixture(scope="module")
def demo_config():
    return make_config(
        lattice=LatticeConfig(nt=8, nx=4, dt=0.5, dx=1.0, mass=1.0, epsilon=0.05,
                              h_profile="time_bump", h_center=1.75, h_width=1.0),
        theory=TheoryConfig(p=4, sigma_max=1),
    )


def test_nonquasifree_demo_counts_graphs_and_multiplicity(demo_config):
    report = run_nonquasifree_demo(demo_config, nt_scan=[6])
    assert report["graphs_enumerated"] == 24
    assert report["multiplicity"] == 12
    assert report["sign"] == -1
    assert report["value"] == pytest.approx(report["closed_form"], rel=1e-9, abs=1e-14)
    assert report["imaginary_residual"] <= 1e-10
    assert set(report["decomposition"]) == {"term0", "h_volume", "D01", "D10"}
    assert report["baseline_trend"][0]["nt"] == 6
    assert report["switching"] == "adiabatic"
    assert set(report["verdict"]) == {"non_quasifree", "d10_suppressed", "baseline_decays"}
    assert report["verdict"]["baseline_decays"] is None


@pytest.mark.acceptance
@pytest.mark.parametrize("mass,h_width", [(0.5, 1.5), (1.0, 3.0)])
def test_nonquasifree_demo_on_the_full_lattice(mass, h_width):
    config = make_config(
        lattice=LatticeConfig(nt=24, nx=8, dt=0.5, dx=1.0, mass=mass, epsilon=0.05,
                              h_profile="time_bump", h_center=5.5, h_width=h_width),
        theory=TheoryConfig(p=4, sigma_max=1),
    )
    report = run_nonquasifree_demo(config, nt_scan=[16, 32])
    assert report["multiplicity"] == 12
    assert report["sign"] == -1
    assert report["value"] == pytest.approx(report["closed_form"], rel=1e-9)
    assert report["ratio_to_baseline"] >= 10.0
    magnitudes = {name: abs(value) for name, value in report["decomposition"].items()}
    assert magnitudes["h_volume"] > 0.0 and magnitudes["D01"] > 0.0
    assert report["d10_suppression"] >= 10.0
    first, last = report["baseline_trend"]
    assert last["abs_value"] < first["abs_value"]
    assert report["verdict"] == {"non_quasifree": True, "d10_suppressed": True, "baseline_decays": True}


def test_nonquasifree_demo_needs_quartic_first_order():
    with pytest.raises(ConfigError):
        run_nonquasifree_demo(make_config(theory=TheoryConfig(p=3, sigma_max=1)))


def test_reconstruction_demo_without_scattering():
    config = make_config(lattice=LatticeConfig(nt=4, nx=3, dt=0.5, dx=1.0, mass=1.0))
    report = run_reconstruction_demo(config, state={"degrees": [0, 2], "seed": 3}, scattering=False)
    assert report["vacuum_residual"] <= 1e-12
    assert report["synthetic"]["branch"] == "z0"
    assert report["passed"]
    assert len(report["coefficient_table"]) == 16
    assert "scattering" not in report


def test_reconstruction_demo_rejects_malformed_coefficients():
    config = make_config(lattice=LatticeConfig(nt=4, nx=3, dt=0.5, dx=1.0, mass=1.0))
    state = {"coefficients": [[1.0, 0.0], [[0.5, 0.0], [0.5, 0.0]]]}
    with pytest.raises(ConfigError):
        run_reconstruction_demo(config, state=state, scattering=False)


def test_reconstruction_demo_with_scattering():
    config = make_config(lattice=LatticeConfig(nt=6, nx=3, dt=0.5, dx=1.0, mass=1.0), theory=TheoryConfig(coupling=0.1))
    report = run_reconstruction_demo(config, state={"degrees": [1], "seed": 1})
    assert report["synthetic"]["branch"] == "r0"
    assert report["scattering"]["branch"] in ("z0", "r0")
    assert report["scattering"]["epsilon"] == 0.0
