import math

import numpy as np
import pytest

from treespec import (
    InputError,
    NodeRecord,
    UndefinedCorrelationError,
    average_ranks,
    chain_probabilities,
    depth_profile,
    expected_accepted_length,
    position_effects,
    spearman_rho,
    summarize,
)


def make_record(
    domain="dom",
    prompt_id=0,
    step_index=0,
    depth=1,
    position_bin=0,
    token=0,
    alpha=0.5,
    entropy=0.1,
):
    # p_draft 1.0 keeps alpha self-consistent for arbitrary synthetic alphas
    return NodeRecord(
        domain=domain,
        prompt_id=prompt_id,
        step_index=step_index,
        depth=depth,
        position_bin=position_bin,
        token=token,
        p_draft=1.0,
        p_target=alpha,
        alpha=alpha,
        target_entropy=entropy,
    )


def synthetic_records(rng, n=1000, domain="dom"):
    records = []
    for i in range(n):
        depth = int(rng.integers(1, 4))
        records.append(
            make_record(
                domain=domain,
                prompt_id=i % 7,
                step_index=i % 64,
                depth=depth,
                position_bin=int(rng.integers(0, 2)),
                token=int(rng.integers(0, 50)),
                alpha=float(rng.random()),
                entropy=float(rng.random() * 2),
            )
        )
    return records


def two_pass_mean_std(values):
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


class TestSummarize:
    def test_two_records(self):
        records = [make_record(alpha=0.0), make_record(alpha=1.0)]
        summary = summarize(records)["dom"]
        assert summary.node_count == 2
        assert summary.mean_alpha == 0.5
        assert summary.std_alpha == 0.5

    def test_empty_input(self):
        assert summarize([]) == {}

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(19)
        records = synthetic_records(rng)
        summary = summarize(records)["dom"]
        mean, std = two_pass_mean_std([r.alpha for r in records])
        assert summary.mean_alpha == pytest.approx(mean, abs=1e-12)
        assert summary.std_alpha == pytest.approx(std, abs=1e-12)
        h_mean, _ = two_pass_mean_std([r.target_entropy for r in records])
        assert summary.mean_entropy == pytest.approx(h_mean, abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(23)
        records = synthetic_records(rng, n=300)
        shuffled = list(records)
        rng.shuffle(shuffled)
        a = summarize(records)["dom"]
        b = summarize(shuffled)["dom"]
        assert a.node_count == b.node_count
        assert a.mean_alpha == pytest.approx(b.mean_alpha, abs=1e-12)
        assert a.std_alpha == pytest.approx(b.std_alpha, abs=1e-12)
        assert a.mean_entropy == pytest.approx(b.mean_entropy, abs=1e-12)
        assert a.per_depth_alpha.keys() == b.per_depth_alpha.keys()
        for depth in a.per_depth_alpha:
            assert a.per_depth_alpha[depth] == pytest.approx(b.per_depth_alpha[depth], abs=1e-12)
        assert a.expected_len == pytest.approx(b.expected_len, abs=1e-12)
        assert a.spearman_rho == pytest.approx(b.spearman_rho, abs=1e-12)

    def test_expected_len_is_sum_of_chain(self):
        rng = np.random.default_rng(29)
        summary = summarize(synthetic_records(rng, n=500))["dom"]
        assert summary.expected_len == pytest.approx(sum(summary.chain_prob.values()), abs=1e-12)
        values = [summary.chain_prob[d] for d in sorted(summary.chain_prob)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_degenerate_correlation_is_nan(self):
        records = [make_record(alpha=0.4, entropy=e) for e in (0.1, 0.2, 0.3)]
        assert math.isnan(summarize(records)["dom"].spearman_rho)


class TestDepthProfile:
    def test_single_cell(self):
        profile = depth_profile([make_record(alpha=0.3), make_record(alpha=0.5)])
        assert profile.cells == {("dom", 1): pytest.approx(0.4)}
        assert profile.delta == {"dom": 0.0}

    def test_reference_delta_row(self, reference_stats):
        per_depth = reference_stats["domains"]["chat"]["per_depth_alpha"]
        records = []
        for depth_str, alpha in per_depth.items():
            records += [make_record(depth=int(depth_str), alpha=alpha) for _ in range(10)]
        profile = depth_profile(records)
        assert profile.delta["dom"] == pytest.approx(0.021, abs=1e-12)

    def test_group_by_oracle(self):
        rng = np.random.default_rng(31)
        records = synthetic_records(rng, n=400) + synthetic_records(rng, n=400, domain="other")
        profile = depth_profile(records)
        groups = {}
        for rec in records:
            groups.setdefault((rec.domain, rec.depth), []).append(rec.alpha)
        for key, alphas in groups.items():
            assert profile.cells[key] == pytest.approx(
                math.fsum(alphas) / len(alphas), abs=1e-12
            )

    def test_bad_depth_rejected(self):
        bad = NodeRecord("d", 0, 0, 0, 0, 0, 1.0, 0.5, 0.5, 0.0)
        with pytest.raises(InputError):
            depth_profile([bad])


class TestChainProbabilities:
    def test_reference_chat_row(self, reference_stats):
        chat = reference_stats["domains"]["chat"]
        per_depth = {int(d): v for d, v in chat["per_depth_alpha"].items()}
        chain = chain_probabilities(per_depth)
        assert chain[2] == pytest.approx(0.3136, abs=5e-5)
        for depth_str, published in chat["chain_prob"].items():
            assert chain[int(depth_str)] == pytest.approx(published, abs=1e-3)

    def test_all_ones(self):
        assert chain_probabilities({1: 1.0, 2: 1.0, 3: 1.0}) == {1: 1.0, 2: 1.0, 3: 1.0}

    def test_halves(self):
        chain = chain_probabilities({1: 0.5, 2: 0.5, 3: 0.5})
        assert chain == {1: 0.5, 2: 0.25, 3: 0.125}

    def test_missing_depth_rejected(self):
        with pytest.raises(InputError):
            chain_probabilities({1: 0.5, 3: 0.5})
        with pytest.raises(InputError):
            chain_probabilities({2: 0.5, 3: 0.5})
        with pytest.raises(InputError):
            chain_probabilities({})


class TestExpectedAcceptedLength:
    def test_reference_values(self, reference_stats):
        for name, payload in reference_stats["domains"].items():
            per_depth = {int(d): v for d, v in payload["per_depth_alpha"].items()}
            assert expected_accepted_length(per_depth) == pytest.approx(
                payload["expected_len"], abs=2e-3
            ), name

    def test_math_row_terms(self):
        # 0.510 + 0.510*0.519 + 0.510*0.519*0.525 = 0.9137
        value = expected_accepted_length({1: 0.510, 2: 0.519, 3: 0.525})
        assert value == pytest.approx(0.9137, abs=5e-5)

    def test_all_zero(self):
        assert expected_accepted_length({1: 0.0, 2: 0.0}) == 0.0

    def test_identity_with_chain_sum(self):
        rng = np.random.default_rng(37)
        for _ in range(25):
            per_depth = {
                d + 1: float(rng.random()) for d in range(int(rng.integers(1, 6)))
            }
            assert expected_accepted_length(per_depth) == pytest.approx(
                sum(chain_probabilities(per_depth).values()), abs=1e-12
            )


class TestPositionEffects:
    def test_reference_depth_one_row(self):
        records = [make_record(depth=1, position_bin=0, alpha=0.520) for _ in range(5)]
        records += [make_record(depth=1, position_bin=1, alpha=0.548) for _ in range(5)]
        effects = position_effects(records)
        assert effects.delta[1] == pytest.approx(0.028, abs=1e-12)

    def test_identical_alphas_zero_delta(self):
        records = [
            make_record(depth=d, position_bin=b, alpha=0.4)
            for d in (1, 2, 3)
            for b in (0, 1)
        ]
        effects = position_effects(records)
        assert all(delta == 0.0 for delta in effects.delta.values())

    def test_group_by_oracle(self):
        rng = np.random.default_rng(41)
        records = synthetic_records(rng, n=600) + synthetic_records(rng, n=300, domain="b")
        effects = position_effects(records)
        groups = {}
        for rec in records:
            groups.setdefault((rec.depth, rec.position_bin), []).append(rec.alpha)
        for key, alphas in groups.items():
            assert effects.cells[key] == pytest.approx(
                math.fsum(alphas) / len(alphas), abs=1e-12
            )

    def test_bad_bin_rejected(self):
        bad = NodeRecord("d", 0, 0, 1, 2, 0, 1.0, 0.5, 0.5, 0.0)
        with pytest.raises(InputError):
            position_effects([bad])


def naive_ranks(values):
    """Quadratic oracle: count-below plus half the tie group."""
    return np.array(
        [
            float(sum(1 for other in values if other < v))
            + (sum(1 for other in values if other == v) + 1) / 2.0
            for v in values
        ]
    )


class TestSpearman:
    def test_perfectly_decreasing(self):
        assert spearman_rho([(1, 0.9), (2, 0.5), (3, 0.1)]) == -1.0

    def test_identical_variables(self):
        x = [0.3, 0.9, 0.1, 0.5]
        assert spearman_rho(list(zip(x, x))) == 1.0

    def test_negated(self):
        x = [0.3, 0.9, 0.1, 0.5]
        assert spearman_rho([(v, -v) for v in x]) == -1.0

    def test_all_tied_rejected(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman_rho([(1.0, 0.2), (1.0, 0.4), (1.0, 0.9)])

    def test_too_few_pairs(self):
        with pytest.raises(InputError):
            spearman_rho([(1.0, 2.0)])

    def test_matches_naive_oracle_with_ties(self):
        rng = np.random.default_rng(43)
        for _ in range(15):
            n = int(rng.integers(3, 200))
            x = np.round(rng.random(n), 1)
            y = np.round(rng.random(n), 1)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            rx, ry = naive_ranks(x), naive_ranks(y)
            assert np.array_equal(average_ranks(x), rx)
            assert np.array_equal(average_ranks(y), ry)
            rx -= rx.mean()
            ry -= ry.mean()
            expected = float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))
            assert spearman_rho(list(zip(x.tolist(), y.tolist()))) == pytest.approx(
                expected, abs=1e-12
            )

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(47)
        x = rng.random(80)
        y = rng.random(80)
        base = spearman_rho(list(zip(x, y)))
        transformed = spearman_rho(list(zip(np.exp(x), y ** 3)))
        assert transformed == pytest.approx(base, abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            n = int(rng.integers(2, 100))
            x = rng.random(n)
            y = rng.random(n)
            assert -1.0 <= spearman_rho(list(zip(x, y))) <= 1.0


class TestReferenceFixtureConsistency:
    def test_chain_and_expected_len_for_all_domains(self, reference_stats):
        for name, payload in reference_stats["domains"].items():
            per_depth = {int(d): v for d, v in payload["per_depth_alpha"].items()}
            chain = chain_probabilities(per_depth)
            for depth_str, published in payload["chain_prob"].items():
                assert chain[int(depth_str)] == pytest.approx(published, abs=1e-3), name
            assert expected_accepted_length(per_depth) == pytest.approx(
                payload["expected_len"], abs=2e-3
            ), name
