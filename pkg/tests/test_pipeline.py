import numpy as np
import pytest

from lrfd.coherence import recovery_error
from lrfd.linalg import thin_svd
from lrfd.observation import (BernoulliRho, ObservationSet, SubspaceBasis, UniformExactCount,
                              sample_observations)
from lrfd.pipeline import (DegenerateEstimateError, NeumannDivergenceError, PowerIterationError,
                           check_theorem_conditions, estimate_rank, lemma1_operator_norm,
                           lemma2_inverse_check, run_algorithm1, truncate_to_rank)
from lrfd.solvers import SolverConfig, solve_cono
from lrfd.synth import (SubspaceMixSpec, gen_oracle_dictionary, gen_subspace_mixture,
                        random_basis)

from conftest import low_rank


def exact_lemma1_norm(u, omega):
    """Independent oracle: the operator acts column by column, so its norm is
    max_j lambda_max(U_j^T U_j) with U_j the rows of U unobserved in column j."""
    best = 0.0
    for j in range(omega.cols):
        rows = ~omega.mask[:, j]
        if rows.any():
            uj = u[rows]
            best = max(best, float(np.linalg.eigvalsh(uj.T @ uj)[-1]))
    return best


# ---- rank estimate and truncation

def test_estimate_rank_rule():
    assert estimate_rank([10.0, 1.0, 0.1, 0.011, 0.009]) == 4
    assert estimate_rank([1.0, 1e-3]) == 1  # strictly above the threshold
    assert estimate_rank([5.0]) == 1
    assert estimate_rank([2.0, 2.0, 0.0]) == 2
    with pytest.raises(ValueError):
        estimate_rank([])
    with pytest.raises(ValueError):
        estimate_rank([1.0, 2.0])


def test_truncate_to_rank(rng):
    m = rng.standard_normal((8, 6))
    t = truncate_to_rank(m, 2)
    assert thin_svd(t).rank == 2
    s = np.linalg.svd(m, compute_uv=False)
    assert np.linalg.norm(m - t) == pytest.approx(np.sqrt(np.sum(s[2:] ** 2)))
    np.testing.assert_allclose(truncate_to_rank(m, 10), m, atol=1e-12)
    with pytest.raises(ValueError):
        truncate_to_rank(m, 0)


# ---- Algorithm 1

def test_algorithm1_planted():
    l0 = gen_subspace_mixture(SubspaceMixSpec(60, 60, 3, 2, 0))
    om = sample_observations(60, 60, UniformExactCount(2880), 0)
    res = run_algorithm1(l0, om, lam=1e6)
    assert res.rank_estimate == 6
    assert res.dictionary.shape == (60, 60)
    np.testing.assert_allclose(np.linalg.norm(res.dictionary, axis=0), 1.0, atol=1e-12)
    assert recovery_error(res.final_estimate, l0) < 1e-3
    assert res.cono_report.lam == res.lrfd_report.lam == 1e6


def test_algorithm1_reuses_cono_report():
    l0 = low_rank(np.random.default_rng(1), 20, 20, 2)
    om = sample_observations(20, 20, UniformExactCount(300), 1)
    cfg = SolverConfig(lam=1e4)
    rep = solve_cono(l0, om, cfg)
    res = run_algorithm1(l0, om, lam=1e4, cfg=cfg, cono_report=rep)
    assert res.cono_report is rep
    with pytest.raises(ValueError):
        run_algorithm1(l0, om, lam=1e3, cfg=cfg, cono_report=rep)


def test_algorithm1_degenerate_and_empty():
    om = sample_observations(5, 5, UniformExactCount(5), 0)
    with pytest.raises(DegenerateEstimateError, match="degenerate estimate"):
        run_algorithm1(np.zeros((5, 5)), om)
    with pytest.raises(ValueError):
        run_algorithm1(np.ones((3, 3)), ObservationSet.empty(3, 3))


@pytest.mark.parametrize("seed", range(4))
def test_never_regress_surrogate(seed):
    # whenever CONO recovers to 1e-4, Algorithm 1 recovers to 1e-3
    rng = np.random.default_rng(seed)
    l0 = low_rank(rng, 40, 40, int(rng.integers(1, 5)))
    om = sample_observations(40, 40, UniformExactCount(1000), seed)
    cfg = SolverConfig(lam=1e6)
    cono = solve_cono(l0, om, cfg)
    res = run_algorithm1(l0, om, lam=1e6, cfg=cfg, cono_report=cono)
    if recovery_error(cono.solution, l0) < 1e-4:
        assert recovery_error(res.final_estimate, l0) < 1e-3


# ---- theorem diagnostics

def test_theorem_conditions_oracle_dictionary():
    l0 = gen_subspace_mixture(SubspaceMixSpec(50, 50, 2, 2, 3))
    a = gen_oracle_dictionary(l0, 8, 16, 3)
    om = sample_observations(50, 50, BernoulliRho(0.5), 3)
    d = check_theorem_conditions(l0, a, om)
    assert d.rank_l0 == 4 and d.rank_a == 8
    assert d.subspace_containment_residual < 1e-10
    assert 1 <= d.mu1_a <= 50
    assert d.rank_ratio == pytest.approx(8 * d.mu1_a * np.log(50) / 50)
    assert d.omega_fraction == om.fraction
    random_a = np.random.default_rng(0).standard_normal((50, 8))
    assert check_theorem_conditions(l0, random_a, om).subspace_containment_residual > 0.1
    with pytest.raises(ValueError):
        check_theorem_conditions(l0, a[:40], om)


# ---- lemma checks

@pytest.mark.parametrize("seed", range(10))
def test_lemma1_power_iteration_matches_exact_oracle(seed):
    rng = np.random.default_rng(seed)
    u = random_basis(rng, 25, 3)
    om = sample_observations(25, 25, BernoulliRho(0.6), seed)
    try:
        got = lemma1_operator_norm(SubspaceBasis(u), om, tol=1e-12, max_iters=20000)
    except PowerIterationError:
        pytest.skip("near-tied top eigenvalues")
    assert got == pytest.approx(exact_lemma1_norm(u, om), rel=1e-4)


def test_lemma1_full_and_empty():
    u = SubspaceBasis(random_basis(np.random.default_rng(0), 10, 2))
    assert lemma1_operator_norm(u, ObservationSet.full(10, 10)) == 0.0
    # nothing observed: the operator is P_U itself, norm 1
    assert lemma1_operator_norm(u, ObservationSet.empty(10, 10)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lemma1_operator_norm(u, ObservationSet.full(9, 10))


def test_lemma1_nonconvergence_carries_residual():
    u = SubspaceBasis(random_basis(np.random.default_rng(0), 30, 3))
    om = sample_observations(30, 30, BernoulliRho(0.5), 0)
    with pytest.raises(PowerIterationError) as info:
        lemma1_operator_norm(u, om, tol=1e-15, max_iters=2)
    assert info.value.residual > 0


def test_lemma2_neumann_residual_decays_geometrically():
    rng = np.random.default_rng(4)
    u = SubspaceBasis(random_basis(rng, 30, 2))
    om = sample_observations(30, 30, BernoulliRho(0.8), 4)
    psi = exact_lemma1_norm(u.basis, om)
    assert psi < 1
    prev = np.inf
    for terms in (0, 5, 10, 20):
        res = lemma2_inverse_check(u, om, terms, psi=psi)
        assert res <= psi ** (terms + 1) * (1 + 1e-6) + 1e-14
        assert res <= prev
        prev = res


def test_lemma2_rejects_divergent_series():
    u = SubspaceBasis(random_basis(np.random.default_rng(0), 8, 2))
    with pytest.raises(NeumannDivergenceError):
        lemma2_inverse_check(u, ObservationSet.empty(8, 8), 10, psi=1.0)
    with pytest.raises(ValueError):
        lemma2_inverse_check(u, ObservationSet.full(8, 8), -1)
