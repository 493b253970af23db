import numpy as np
import pytest

from nqsvmc.chimera import (
    annealer_sample,
    build_chimera,
    decode,
    decode_batch,
    effective_fields,
    embed_rbm,
    emulate_anneal,
    inject_chain_breaks,
    instance_to_text,
    lower,
)
from nqsvmc.rbm import RbmParams, all_configs, init_params
from nqsvmc.sampling import SamplerSpec, sample_exact


def zero_params(n, m):
    return RbmParams(a=np.zeros(n), b=np.zeros(m), W=np.zeros((m, n)))


class TestBuildChimera:
    def test_single_cell(self):
        g = build_chimera(1)
        assert g.n_nodes == 8
        assert len(g.edges) == 16

    def test_two_by_two(self):
        # 16 K44 couplers in each of 4 cells plus 2 * 8 inter-cell couplers
        g = build_chimera(2)
        assert g.n_nodes == 32
        assert len(g.edges) == 80

    def test_full_2000q_chip(self):
        assert build_chimera(16).n_nodes == 2048

    @pytest.mark.parametrize("n", range(1, 7))
    def test_edge_count_formula(self, n):
        g = build_chimera(n)
        assert len(g.edges) == 16 * n * n + 8 * n * (n - 1)
        assert len(g.edge_set()) == len(g.edges)

    def test_invalid_size(self):
        with pytest.raises(ValueError, match=">= 1"):
            build_chimera(0)

    def test_intra_cell_is_bipartite_k44(self):
        g = build_chimera(2)
        for p, q in g.edges:
            if p // 8 == q // 8:  # same cell: must join the two partitions
                assert (p % 8 < 4) != (q % 8 < 4)
            else:  # inter-cell: same partition, same in-cell index
                assert p % 8 == q % 8


class TestEmbedRbm:
    def test_paper_sized_embedding_uses_32_qubits(self):
        emb = embed_rbm(8, 8, 2)
        assert len(emb.qubits_used()) == 32
        assert all(len(c) == 2 for c in emb.all_chains)

    def test_full_chip_embedding(self):
        emb = embed_rbm(64, 64, 16)
        assert len(emb.qubits_used()) == 2048

    def test_capacity_exceeded(self):
        with pytest.raises(ValueError, match="L_max = 16"):
            embed_rbm(9, 8, 2)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_structural_invariants(self, n):
        # chains disjoint, consecutive qubits adjacent, every pair hosted
        graph = build_chimera(n)
        edge_set = graph.edge_set() | {(q, p) for p, q in graph.edge_set()}
        for n_vis in range(1, 4 * n + 1):
            for n_hid in (1, 4 * n):
                emb = embed_rbm(n_vis, n_hid, n)
                used = emb.qubits_used()
                assert len(used) == len(set(used))
                for chain in emb.all_chains:
                    for p, q in zip(chain[:-1], chain[1:]):
                        assert (p, q) in edge_set
                for i in range(n_vis):
                    for j in range(n_hid):
                        p, q = emb.coupler_for(i, j)
                        assert (p, q) in edge_set
                        assert p in emb.visible_chains[i]
                        assert q in emb.hidden_chains[j]


class TestLower:
    def test_logical_coupler_value(self):
        p = zero_params(1, 1)
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.array([[0.5]]))
        emb = embed_rbm(1, 1, 1)
        inst = lower(p, emb, 1.0)
        edge = tuple(sorted(emb.coupler_for(0, 0)))
        assert inst.couplers[edge] == pytest.approx(0.5)
        assert inst.clip_report == 0

    def test_clipping_counts(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.array([[2.0]]))
        emb = embed_rbm(1, 1, 1)
        inst = lower(p, emb, 1.0)
        edge = tuple(sorted(emb.coupler_for(0, 0)))
        assert inst.couplers[edge] == pytest.approx(1.0)
        assert inst.clip_report == 1

    def test_beta_division(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.array([[1.0]]))
        emb = embed_rbm(1, 1, 1)
        inst = lower(p, emb, 2.0)
        edge = tuple(sorted(emb.coupler_for(0, 0)))
        assert inst.couplers[edge] == pytest.approx(0.5)

    def test_bias_spread_over_chain(self, rng):
        p = init_params(8, 8, rng, scale=0.4)
        emb = embed_rbm(8, 8, 2)
        inst = lower(p, emb, 1.0)
        for i, chain in enumerate(emb.visible_chains):
            assert sum(inst.biases[q] for q in chain) == pytest.approx(p.a[i], rel=1e-12)
            vals = {inst.biases[q] for q in chain}
            assert len(vals) == 1  # spread equally
        for j, chain in enumerate(emb.hidden_chains):
            assert sum(inst.biases[q] for q in chain) == pytest.approx(p.b[j], rel=1e-12)

    def test_chain_couplers_ferromagnetic(self, rng):
        p = init_params(4, 4, rng, scale=0.1)
        emb = embed_rbm(4, 4, 2)
        inst = lower(p, emb, 1.0)
        for edge in inst.chain_edges:
            assert inst.couplers[edge] == pytest.approx(1.0)

    def test_large_chain_coupling_clipped_with_warning(self, rng):
        p = init_params(2, 2, rng, scale=0.1)
        emb = embed_rbm(2, 2, 2, chain_coupling=2.0)
        with pytest.warns(UserWarning, match="clipped"):
            inst = lower(p, emb, 1.0)
        for edge in inst.chain_edges:
            assert inst.couplers[edge] == pytest.approx(1.0)

    def test_invalid_beta(self, rng):
        p = init_params(2, 2, rng)
        emb = embed_rbm(2, 2, 1)
        with pytest.raises(ValueError, match="> 0"):
            lower(p, emb, 0.0)

    def test_clipping_monotone_under_shrinking(self, rng):
        emb = embed_rbm(4, 4, 1)
        p = init_params(4, 4, rng, scale=3.0)
        clips = []
        for factor in (1.0, 0.7, 0.4, 0.1, 0.01):
            q = RbmParams(a=factor * p.a, b=factor * p.b, W=factor * p.W)
            clips.append(lower(q, emb, 1.0).clip_report)
        assert all(c1 >= c2 for c1, c2 in zip(clips[:-1], clips[1:]))

    def test_text_export_round_trips(self, rng):
        p = init_params(2, 2, rng, scale=0.3)
        emb = embed_rbm(2, 2, 1)
        inst = lower(p, emb, 1.0)
        text = instance_to_text(inst)
        lines = text.strip().splitlines()
        bias_lines = [l for l in lines if len(l.split()) == 2]
        coupler_lines = [l for l in lines if len(l.split()) == 3]
        assert len(bias_lines) == inst.graph.n_nodes
        assert len(coupler_lines) == len(inst.couplers)
        for line in bias_lines:
            q, b = line.split()
            assert float(b) == inst.biases[int(q)]
        for line in coupler_lines:
            i, j, val = line.split()
            assert float(val) == inst.couplers[(int(i), int(j))]
        assert instance_to_text(inst) == text  # deterministic


class TestEmulateAnneal:
    def test_calibrated_tiny_instance_matches_exact(self, rng):
        # x = 1, no breaks, single-qubit chains: decoded visible marginal
        # must match the exact quantum distribution
        p = init_params(2, 2, rng, scale=0.7)
        emb = embed_rbm(2, 2, 1)
        inst = lower(p, emb, 1.0)
        raw = emulate_anneal(inst, 1.0, 60_000, 2, 0.0, np.random.default_rng(4), burn_in=50, n_chains=4096)
        v, h, broken = decode_batch(raw, emb, np.random.default_rng(5))
        exact = sample_exact(p, 2)
        bits = ((1 - v) // 2).astype(np.int64)
        codes = bits @ (1 << np.arange(2))
        counts = np.bincount(codes, minlength=4) / raw.shape[0]
        tv = 0.5 * float(np.abs(counts - exact.weights).sum())
        assert tv <= 0.02
        assert broken.sum() == 0

    def test_boltzmann_correctness_with_chains(self, rng):
        # chained 8-active-qubit instance against direct enumeration of
        # exp(-x E') including the unscaled chain couplers
        p = init_params(2, 2, rng, scale=0.5)
        emb = embed_rbm(2, 2, 2)
        inst = lower(p, emb, 1.0)
        x = 1.3
        b_eff, j_eff = effective_fields(inst, x)
        active = np.nonzero((b_eff != 0) | (np.abs(j_eff).sum(axis=1) != 0))[0]
        assert active.size == 8
        states = all_configs(active.size).astype(float)
        ja = j_eff[np.ix_(active, active)]
        expo = states @ b_eff[active] + 0.5 * np.einsum("si,ij,sj->s", states, ja, states)
        w = np.exp(expo - expo.max())
        w /= w.sum()
        raw = emulate_anneal(inst, x, 100_000, 2, 0.0, np.random.default_rng(31), burn_in=100, n_chains=8192)
        bits = ((1 - raw[:, active]) // 2).astype(np.int64)
        codes = bits @ (1 << np.arange(active.size))
        emp = np.bincount(codes, minlength=2**active.size) / raw.shape[0]
        assert 0.5 * float(np.abs(emp - w).sum()) <= 0.02

    def test_zero_params_gives_uniform_qubits(self):
        p = zero_params(2, 2)
        emb = embed_rbm(2, 2, 1)
        inst = lower(p, emb, 1.0)
        raw = emulate_anneal(inst, 1.0, 20_000, 1, 0.0, np.random.default_rng(6))
        freq = (raw == 1).mean(axis=0)
        sigma = 0.5 / np.sqrt(raw.shape[0])
        assert np.all(np.abs(freq - 0.5) <= 4 * sigma)

    def test_parameter_validation(self, rng):
        p = init_params(2, 2, rng)
        inst = lower(p, embed_rbm(2, 2, 1), 1.0)
        with pytest.raises(ValueError, match="mismatch"):
            emulate_anneal(inst, 0.0, 10, 1, 0.0, rng)
        with pytest.raises(ValueError, match="p_break"):
            emulate_anneal(inst, 1.0, 10, 1, 1.0, rng)

    def test_mismatch_scales_logical_not_chains(self, rng):
        p = init_params(2, 2, rng, scale=0.4)
        emb = embed_rbm(2, 2, 2)
        inst = lower(p, emb, 1.0)
        b_eff, j_eff = effective_fields(inst, 2.0)
        for (q1, q2) in inst.logical_edges:
            assert j_eff[q1, q2] == pytest.approx(2.0 * inst.couplers[(q1, q2)])
        for (q1, q2) in inst.chain_edges:
            assert j_eff[q1, q2] == pytest.approx(inst.couplers[(q1, q2)])
        assert np.allclose(b_eff, 2.0 * inst.biases)


class TestRoundTripFidelity:
    def test_single_cell_chains_stay_unanimous(self, rng):
        # single-cell embeddings: every chain is one qubit, so the full
        # lower -> sample -> decode round trip never reports a break; at
        # the clipped chain coupling |J| = 1 the equilibrium thermal break
        # probability of a 2-qubit chain is e^-2/(1 + e^-2) ~ 0.12, so the
        # >= 99% unanimity bound is a single-cell property
        p = init_params(3, 3, rng, scale=0.4)
        emb = embed_rbm(3, 3, 1, chain_coupling=2.0)
        with pytest.warns(UserWarning, match="clipped"):
            inst = lower(p, emb, 1.0)
        raw = emulate_anneal(inst, 1.0, 5_000, 1, 0.0, np.random.default_rng(9), burn_in=20)
        _, _, broken = decode_batch(raw, emb, np.random.default_rng(10))
        unanimity = 1.0 - broken.sum() / (raw.shape[0] * len(emb.all_chains))
        assert unanimity >= 0.99

    def test_two_cell_thermal_break_rate_matches_equilibrium(self, rng):
        # documents the n=2 reality: 2-qubit chains at J = 1 break with the
        # analytic equilibrium probability ~ 0.119 when weights are small
        p = init_params(8, 8, rng, scale=0.02)
        emb = embed_rbm(8, 8, 2)
        inst = lower(p, emb, 1.0)
        raw = emulate_anneal(inst, 1.0, 20_000, 2, 0.0, np.random.default_rng(11), burn_in=50, n_chains=2048)
        _, _, broken = decode_batch(raw, emb, np.random.default_rng(12))
        rate = broken.sum() / (raw.shape[0] * len(emb.all_chains))
        expected = np.exp(-2.0) / (1.0 + np.exp(-2.0))
        assert rate == pytest.approx(expected, abs=0.01)


class TestChainBreaks:
    def test_injection_rate_matches_p_break(self):
        emb = embed_rbm(8, 8, 2)
        raw = np.ones((10_000, 32), dtype=np.int8)
        count = inject_chain_breaks(raw, emb.all_chains, 0.2, np.random.default_rng(41))
        rate = count / (10_000 * len(emb.all_chains))
        assert rate == pytest.approx(0.2, abs=0.01)

    def test_injected_breaks_detected_by_decode(self):
        # on unanimous two-qubit chains every injected flip is a detectable break
        emb = embed_rbm(8, 8, 2)
        raw = np.ones((5_000, 32), dtype=np.int8)
        count = inject_chain_breaks(raw, emb.all_chains, 0.15, np.random.default_rng(43))
        _, _, broken = decode_batch(raw, emb, np.random.default_rng(44))
        assert int(broken.sum()) == count

    def test_zero_probability_is_noop(self):
        emb = embed_rbm(4, 4, 2)
        raw = np.ones((100, 32), dtype=np.int8)
        assert inject_chain_breaks(raw, emb.all_chains, 0.0, np.random.default_rng(1)) == 0
        assert np.all(raw == 1)


class TestDecode:
    def test_majority_with_break(self):
        emb = embed_rbm(1, 1, 3)  # visible chain of three qubits
        raw = np.ones(emb.graph.n_nodes, dtype=np.int8)
        chain = emb.visible_chains[0]
        raw[chain[2]] = -1
        v, h, broken = decode(raw, emb, np.random.default_rng(0))
        assert v[0] == 1
        assert broken == 1

    def test_unanimous_chain_not_broken(self):
        emb = embed_rbm(1, 1, 3)
        raw = np.ones(emb.graph.n_nodes, dtype=np.int8)
        v, h, broken = decode(raw, emb, np.random.default_rng(0))
        assert v[0] == 1 and h[0] == 1 and broken == 0

    def test_tie_is_fair_coin_and_flagged(self):
        emb = embed_rbm(1, 1, 2)  # two-qubit chains
        raw = np.ones((4000, emb.graph.n_nodes), dtype=np.int8)
        chain = emb.visible_chains[0]
        raw[:, chain[0]] = 1
        raw[:, chain[1]] = -1
        v, h, broken = decode_batch(raw, emb, np.random.default_rng(8))
        assert np.all(broken >= 1)
        frac_plus = float((v[:, 0] == 1).mean())
        assert abs(frac_plus - 0.5) <= 4 * 0.5 / np.sqrt(4000)

    def test_missing_qubits_rejected(self):
        emb = embed_rbm(2, 2, 1)
        with pytest.raises(ValueError, match="cover"):
            decode(np.ones(4, dtype=np.int8), emb, np.random.default_rng(0))


class TestAnnealerSample:
    def test_uniform_visible_for_zero_params(self):
        p = zero_params(2, 2)
        emb = embed_rbm(2, 2, 1)
        spec = SamplerSpec(kind="annealer-emulator", n_samples=20_000, burn_in=10, thinning=1, n_chains=2048)
        batch = annealer_sample(p, emb, 1.0, 1.0, spec, np.random.default_rng(3))
        freq = (batch.visible == 1).mean(axis=0)
        assert np.all(np.abs(freq - 0.5) <= 4 * 0.5 / np.sqrt(batch.n_samples))

    def test_visible_marginal_matches_exact(self, rng):
        p = init_params(2, 2, rng, scale=0.6)
        emb = embed_rbm(2, 2, 1)
        spec = SamplerSpec(kind="annealer-emulator", n_samples=60_000, burn_in=50, thinning=2, n_chains=4096)
        batch = annealer_sample(p, emb, 1.0, 1.0, spec, np.random.default_rng(13))
        exact = sample_exact(p, 2)
        bits = ((1 - batch.visible) // 2).astype(np.int64)
        codes = bits @ (1 << np.arange(2))
        counts = np.bincount(codes, minlength=4) / batch.n_samples
        assert 0.5 * float(np.abs(counts - exact.weights).sum()) <= 0.02

    def test_default_batch_size(self):
        assert SamplerSpec(kind="annealer-emulator").n_samples == 10_000

    def test_returns_hidden_and_diagnostics(self, rng):
        p = init_params(2, 2, rng, scale=0.3)
        emb = embed_rbm(2, 2, 2)
        spec = SamplerSpec(kind="annealer-emulator", n_samples=500, burn_in=10, thinning=1, n_chains=128, p_break=0.1)
        batch = annealer_sample(p, emb, 1.0, 1.0, spec, np.random.default_rng(14))
        assert batch.hidden is not None and batch.hidden.shape == (500, 2)
        assert 0.0 < batch.diagnostics["chain_break_rate"] < 1.0
        assert batch.diagnostics["sweeps_per_sample"] == 1

    def test_seeded_determinism(self, rng):
        p = init_params(2, 2, rng, scale=0.4)
        emb = embed_rbm(2, 2, 2)
        spec = SamplerSpec(kind="annealer-emulator", n_samples=300, burn_in=10, thinning=1, n_chains=64, p_break=0.05)
        one = annealer_sample(p, emb, 1.2, 0.8, spec, np.random.default_rng(55))
        two = annealer_sample(p, emb, 1.2, 0.8, spec, np.random.default_rng(55))
        assert one.visible.tobytes() == two.visible.tobytes()
        assert one.hidden.tobytes() == two.hidden.tobytes()
        assert one.diagnostics == two.diagnostics
