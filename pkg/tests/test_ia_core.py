import numpy as np
import pytest

from iafeedback.channel import ChannelRealization, NetworkConfig, complex_normal, generate_channels, make_rng
from iafeedback.errors import AlignmentError, ConfigError, EigenGapError
from iafeedback.ia_core import (
    EigenSelection,
    alignment_error,
    chain_product,
    eigen_sensitivity,
    exchange_factors,
    filter_from_nullspace,
    ia_precoders_chain,
    ia_precoders_exchange,
    interference_leakage,
    perturbed_v1,
    phase_aligned_error,
    precoders_from_json,
    precoders_to_json,
    sorted_eig,
    span_residual,
    sum_throughput_perfect,
    zf_filters,
    zf_receive_filter,
)


def setup(K=4, seed=0, P=1.0, dist=None):
    cfg = NetworkConfig(K=K, M=K - 1, P=P, distances=dist)
    return cfg, generate_channels(cfg, seed)


@pytest.mark.parametrize("K", [4, 5, 6])
@pytest.mark.parametrize("ctor,scheme", [(ia_precoders_chain, "chain"), (ia_precoders_exchange, "exchange")])
def test_alignment_holds(K, ctor, scheme):
    for seed in range(20):
        cfg, r = setup(K, seed)
        V = ctor(cfg, r)
        assert V.shape == (K, K - 1, 1)
        assert np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-12)
        assert alignment_error(cfg, r, V, scheme) < 1e-9


def test_identity_channels():
    K, M = 4, 3
    H = np.broadcast_to(np.eye(M, dtype=complex), (K, K, M, M)).copy()
    r = ChannelRealization(H=H)
    cfg = NetworkConfig(K=K, M=M)
    assert np.allclose(chain_product(H), np.eye(M))
    V = ia_precoders_chain(cfg, r)
    assert alignment_error(cfg, r, V) == pytest.approx(0.0, abs=1e-15)


def test_exchange_equal_channel_degenerate_case():
    cfg, r = setup(4, 3)
    H = r.H.copy()
    H[2, 1] = H[2, 0]
    H[3, 1] = H[3, 0]
    deg = ChannelRealization(H=H)
    he_a, he_b = exchange_factors(H)
    assert np.allclose(he_a @ he_b, np.eye(3))
    V = ia_precoders_exchange(cfg, deg)
    assert span_residual(V[0], V[1]) < 1e-12


def test_shapes_k6_k5():
    cfg, r = setup(6, 1)
    V = ia_precoders_chain(cfg, r)
    assert V.shape == (6, 5, 1)
    cfg, r = setup(5, 1)
    assert ia_precoders_exchange(cfg, r).shape == (5, 4, 1)


def test_zf_filters_null_interference():
    dist = np.full((4, 4), 2.0)
    np.fill_diagonal(dist, 1.0)
    cfg, r = setup(4, 2, P=1e3, dist=dist)
    V = ia_precoders_chain(cfg, r)
    R = zf_filters(cfg, r, V)
    assert np.allclose(np.linalg.norm(R, axis=1), 1.0, atol=1e-12)
    for k in range(4):
        for j in range(4):
            if j != k:
                assert abs(R[k, :, 0].conj() @ r.H[k, j] @ V[j, :, 0]) < 1e-9
        # phase convention: desired gain real positive
        g = R[k, :, 0].conj() @ r.H[k, k] @ V[k, :, 0]
        assert g.real > 0 and abs(g.imag) < 1e-12
    assert interference_leakage(cfg, r, V, R).sum() < 1e-15 * cfg.P * cfg.K


def test_zf_without_interferers_is_matched_filter():
    cfg, r = setup(4, 4)
    V = ia_precoders_chain(cfg, r)
    Vz = np.zeros_like(V)
    Vz[1] = V[1]
    f = zf_receive_filter(cfg, r, Vz, 1)
    m = r.H[1, 1] @ V[1]
    assert np.allclose(f, m / np.linalg.norm(m))


def test_zf_rejects_unaligned_precoders():
    cfg, r = setup(4, 5)
    rng = make_rng(0)
    V = complex_normal(rng, (4, 3, 1))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    with pytest.raises(AlignmentError):
        zf_receive_filter(cfg, r, V, 0)


def test_random_precoders_are_misaligned():
    cfg = NetworkConfig(K=4, M=3)
    rng = make_rng(1)
    errs = []
    for seed in range(50):
        r = generate_channels(cfg, seed)
        V = complex_normal(rng, (4, 3, 1))
        errs.append(alignment_error(cfg, r, V / np.linalg.norm(V, axis=1, keepdims=True)))
    assert min(errs) > 0.1


def test_span_residual_equal_spans():
    rng = make_rng(2)
    A = complex_normal(rng, (3, 2))
    T = complex_normal(rng, (2, 2))
    assert span_residual(A, A @ T) < 1e-12


def test_filter_from_nullspace_rank_check():
    rng = make_rng(3)
    with pytest.raises(AlignmentError):
        filter_from_nullspace(complex_normal(rng, (3, 3)), complex_normal(rng, (3, 1)), 1)


def test_scale_invariance():
    cfg, r = setup(4, 6)
    V = ia_precoders_chain(cfg, r)
    scaled = ChannelRealization(H=r.H * (2.5 - 1.5j))
    W = ia_precoders_chain(cfg, scaled)
    assert alignment_error(cfg, scaled, W) < 1e-9
    for k in range(4):
        assert span_residual(V[k], W[k]) < 1e-9


def test_eigen_selection_strategies():
    cfg, r = setup(4, 7)
    lam, _ = sorted_eig(chain_product(r.H))
    assert np.all(np.diff(np.abs(lam)) <= 0)
    for sel in (EigenSelection("smallest"), EigenSelection("indices", [1])):
        V = ia_precoders_chain(cfg, r, sel)
        assert alignment_error(cfg, r, V) < 1e-9
    with pytest.raises(ConfigError):
        EigenSelection("median")
    with pytest.raises(ConfigError):
        EigenSelection("indices", [])


def test_throughput_zero_power_limit_and_unit_gain():
    K, M = 4, 3
    H = np.zeros((K, K, M, M), dtype=complex)
    for k in range(K):
        H[k, k] = np.eye(M)
    r = ChannelRealization(H=H)
    V = np.zeros((K, M, 1), dtype=complex)
    V[:, 0, 0] = 1.0
    assert sum_throughput_perfect(NetworkConfig(K=K, M=M, P=1.0), r, V, V) == pytest.approx(4.0)
    assert sum_throughput_perfect(NetworkConfig(K=K, M=M, P=1e-300), r, V, V) < 1e-290


def _oracle_rate(P, gain, H, V, R):
    """Sum rate with every cross term kept as noise, from raw channels."""
    K = H.shape[0]
    total = 0.0
    for k in range(K):
        s = P * gain[k, k] * abs(np.vdot(R[k], H[k, k] @ V[k])) ** 2
        i = sum(P * gain[k, j] * abs(np.vdot(R[k], H[k, j] @ V[j])) ** 2 for j in range(K) if j != k)
        total += np.log2(1.0 + s / (1.0 + i))
    return total


def test_throughput_matches_oracle_monte_carlo():
    dist = np.full((4, 4), 2.0)
    np.fill_diagonal(dist, 1.0)
    cfg = NetworkConfig(K=4, M=3, P=1e3, distances=dist)
    ours, oracle = [], []
    for seed in range(10000):
        r = generate_channels(cfg, seed)
        V = ia_precoders_chain(cfg, r)
        R = zf_filters(cfg, r, V)
        ours.append(sum_throughput_perfect(cfg, r, V, R))
        oracle.append(_oracle_rate(cfg.P, cfg.path_gain(), r.H, V[:, :, 0], R[:, :, 0]))
    ours, oracle = np.array(ours), np.array(oracle)
    assert np.max(np.abs(ours - oracle)) < 1e-9
    assert abs(ours.mean() - oracle.mean()) < 1e-10


def test_perfect_csi_dof_slope():
    cfg = NetworkConfig(K=4, M=3)
    slopes = {30.0: [], 40.0: []}
    for seed in range(400):
        r = generate_channels(cfg, seed)
        V = ia_precoders_chain(cfg, r)
        R = zf_filters(cfg, r, V)
        for snr in slopes:
            P = 10 ** (snr / 10)
            lo = sum_throughput_perfect(cfg.with_power(P), r, V, R)
            hi = sum_throughput_perfect(cfg.with_power(4 * P), r, V, R)
            slopes[snr].append((hi - lo) / 2)
    for snr, s in slopes.items():
        assert np.mean(s) == pytest.approx(4.0, rel=0.05)


def test_perturbation_zero_sigma():
    _, r = setup(4, 8)
    dH = complex_normal(make_rng(0), (3, 3))
    dH /= np.linalg.norm(dH)
    first, exact = perturbed_v1(r, EigenSelection(), dH, 0.0)
    he_a, he_b = exchange_factors(r.H)
    _, vecs = sorted_eig(he_a @ he_b)
    assert np.allclose(first, vecs[:, 0])
    assert np.allclose(exact, vecs[:, 0], atol=1e-12)


def test_perturbation_first_order_accuracy():
    ratios = []
    for seed in range(20):
        _, r = setup(4, seed)
        dH = complex_normal(make_rng(seed), (3, 3))
        dH /= np.linalg.norm(dH)
        errs = []
        for eps in (1e-2, 1e-3, 1e-4):
            first, exact = perturbed_v1(r, EigenSelection(), dH, eps ** 2)
            errs.append(np.linalg.norm(first - exact))
        ratios += [errs[0] / errs[1], errs[1] / errs[2]]
    # typical ratio is 100; individual draws with a small eigen-gap converge later
    assert 50 <= np.median(ratios) <= 200


def test_perturbation_preconditions():
    _, r = setup(4, 9)
    with pytest.raises(ConfigError):
        perturbed_v1(r, EigenSelection(), np.zeros((3, 3)), 1e-4)
    dH = np.eye(3) / np.sqrt(3)
    with pytest.raises(ConfigError):
        perturbed_v1(r, EigenSelection(), dH, 1.5)
    H = r.H.copy()
    H[2, 1] = H[2, 0]
    H[3, 1] = H[3, 0]
    with pytest.raises(EigenGapError):
        perturbed_v1(ChannelRealization(H=H), EigenSelection(), dH, 1e-4)


def test_phase_aligned_error_and_sensitivity():
    v = np.array([1.0, 0.0, 0.0], dtype=complex)
    assert np.allclose(phase_aligned_error(v, 1j * v), 0.0)
    _, r = setup(4, 10)
    assert eigen_sensitivity(r) > 0


def test_precoder_json_round_trip():
    cfg, r = setup(4, 11)
    V = ia_precoders_chain(cfg, r)
    assert np.array_equal(precoders_from_json(precoders_to_json(V)), V)
