import numpy as np
import pytest
from sklearn.base import clone

from helpers import EMBED, SWR, full_model_grad_check, random_batch, tiny_config, tiny_network
from swrnli import tensor as T
from swrnli.data import NLIExample
from swrnli.exceptions import ContractError, FrozenParserError, LabelError
from swrnli.gradcheck import grad_check
from swrnli.nli import (DecomposableAttentionClassifier, ESIMClassifier, FusionMode, compute_attention,
                        count_parameters, sample_noise_swr)
from swrnli.nli.estimator import evaluate_accuracy
from swrnli.nli.fusion import noise_for_tokens
from swrnli.nli.models import ClassifierHead, build_model
from swrnli.parser import BiaffineParser
from swrnli.synthetic import make_treebank
from swrnli.tensor import Tensor


class TestAttention:
    def test_hand_example(self):
        p, h = Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]])
        sp, sh = np.array([[2.0, 1.0]]), np.array([[1.0, 1.0]])
        assert compute_attention(p, h).data[0, 0] == 11.0
        assert compute_attention(p, h, sp, sh, "sa").data[0, 0] == 14.0

    def test_zero_swrs_bit_equal(self):
        rng = np.random.default_rng(0)
        p, h = Tensor(rng.normal(size=(5, 7))), Tensor(rng.normal(size=(3, 7)))
        base = compute_attention(p, h).data
        sa = compute_attention(p, h, np.zeros((5, 4)), np.zeros((3, 4)), "sa").data
        assert np.array_equal(base, sa)

    def test_difference_is_swr_dot_products(self):
        rng = np.random.default_rng(1)
        p, h = Tensor(rng.normal(size=(2, 5, 6))), Tensor(rng.normal(size=(2, 4, 6)))
        sp, sh = rng.normal(size=(2, 5, 3)), rng.normal(size=(2, 4, 3))
        diff = compute_attention(p, h, sp, sh, "sa").data - compute_attention(p, h).data
        assert np.max(np.abs(diff - np.einsum("bik,bjk->bij", sp, sh))) <= 1e-12

    def test_length_mismatch(self):
        p, h = Tensor(np.ones((3, 2))), Tensor(np.ones((2, 2)))
        with pytest.raises(ContractError):
            compute_attention(p, h, np.ones((4, 2)), np.ones((2, 2)), "sa")

    def test_baseline_rejects_swrs(self):
        with pytest.raises(ContractError):
            compute_attention(Tensor(np.ones((1, 2))), Tensor(np.ones((1, 2))), np.ones((1, 1)),
                              np.ones((1, 1)))

    def test_gradient_flows_to_encodings_only(self):
        rng = np.random.default_rng(2)
        p, h = T.parameter(rng.normal(size=(3, 4))), T.parameter(rng.normal(size=(2, 4)))
        sp, sh = rng.normal(size=(3, 2)), rng.normal(size=(2, 2))
        report = grad_check(lambda xs: (compute_attention(xs[0], xs[1], sp, sh, "sa") ** 2).sum(), [p, h])
        assert report.passed, report


def permuted_premise(batch, order):
    p_ids, p_mask, h_ids, h_mask, swrs, targets = batch
    p_ids = p_ids.copy()
    p_ids[0, :len(order)] = p_ids[0, order]
    return p_ids, p_mask, h_ids, h_mask, swrs, targets


class TestForward:
    @pytest.mark.parametrize("arch", ["da", "esim"])
    @pytest.mark.parametrize("fusion", list(FusionMode))
    def test_output_shape(self, arch, fusion):
        net = tiny_network(arch, fusion)
        p_ids, p_mask, h_ids, h_mask, swrs, _ = random_batch(0, with_swrs=fusion.uses_swr)
        assert net.forward(p_ids, p_mask, h_ids, h_mask, swrs).shape == (2, 3)

    @pytest.mark.parametrize("arch", ["da", "esim"])
    def test_missing_swrs(self, arch):
        net = tiny_network(arch, "sa")
        p_ids, p_mask, h_ids, h_mask, _, _ = random_batch(0, with_swrs=False)
        with pytest.raises(ContractError):
            net.forward(p_ids, p_mask, h_ids, h_mask, None)

    def test_da_baseline_ignores_premise_order(self):
        net = tiny_network("da", "baseline")
        batch = random_batch(3, with_swrs=False)
        a = net.forward(*batch[:5]).data
        b = net.forward(*permuted_premise(batch, [3, 1, 0, 2])[:5]).data
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_da_with_syntactic_attention_sees_order(self):
        net = tiny_network("da", "sa")
        batch = random_batch(3)
        a = net.forward(*batch[:5]).data
        b = net.forward(*permuted_premise(batch, [3, 1, 0, 2])[:5]).data
        assert np.max(np.abs(a - b)) > 1e-6

    def test_esim_baseline_sees_order(self):
        net = tiny_network("esim", "baseline")
        batch = random_batch(3, with_swrs=False)
        a = net.forward(*batch[:5]).data
        b = net.forward(*permuted_premise(batch, [3, 1, 0, 2])[:5]).data
        assert np.max(np.abs(a - b)) > 1e-6

    @pytest.mark.parametrize("arch", ["da", "esim"])
    def test_zero_swrs_reproduce_baseline(self, arch):
        base, sa = tiny_network(arch, "baseline", seed=4), tiny_network(arch, "sa", seed=4)
        p_ids, p_mask, h_ids, h_mask, swrs, _ = random_batch(5)
        zeros = (np.zeros_like(swrs[0]), np.zeros_like(swrs[1]))
        a = base.forward(p_ids, p_mask, h_ids, h_mask).data
        b = sa.forward(p_ids, p_mask, h_ids, h_mask, zeros).data
        assert np.array_equal(a, b)


class TestClassifierHead:
    def test_late_fusion_width(self):
        head = ClassifierHead(4, 6, 3, np.random.default_rng(0), swr_dim=3)
        assert head.input_dim == 10
        out = head(Tensor(np.ones((1, 4))), np.ones((1, 3)), np.ones((1, 3)))
        assert out.shape == (1, 3)

    def test_zero_columns_reproduce_plain_head(self):
        plain = ClassifierHead(4, 6, 3, np.random.default_rng(0))
        wide = ClassifierHead(4, 6, 3, np.random.default_rng(0), swr_dim=3)
        wide.first.weight.data = plain.first.weight.data.copy()
        wide.first.bias.data = plain.first.bias.data.copy()
        wide.out.weight.data = plain.out.weight.data.copy()
        wide.out.bias.data = plain.out.bias.data.copy()
        wide.swr_weight.data[:] = 0.0
        e = Tensor(np.random.default_rng(1).normal(size=(2, 4)))
        swr = np.random.default_rng(2).normal(size=(2, 3))
        assert np.array_equal(plain(e).data, wide(e, swr, -swr).data)

    def test_widened_column_gradient(self):
        head = ClassifierHead(4, 6, 3, np.random.default_rng(0), swr_dim=3)
        rng = np.random.default_rng(3)
        e, sp, sh = Tensor(rng.normal(size=(2, 4))), rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        report = grad_check(lambda w: T.cross_entropy(head(e, sp, sh), np.array([0, 2])),
                            head.swr_weight, step=1e-5, tol=1e-3)
        assert report.passed, report

    def test_dimension_mismatch(self):
        head = ClassifierHead(4, 6, 3, np.random.default_rng(0), swr_dim=3)
        with pytest.raises(ContractError):
            head(Tensor(np.ones((1, 4))), np.ones((1, 2)), np.ones((1, 2)))
        with pytest.raises(ContractError):
            head(Tensor(np.ones((1, 5))), np.ones((1, 3)), np.ones((1, 3)))


class TestNoise:
    def test_standard_normal_statistics(self):
        x = sample_noise_swr((100000,), np.random.default_rng(42))
        assert abs(x.mean()) < 0.02 and abs(x.std() - 1) < 0.02

    def test_same_seed_same_draws(self):
        a = sample_noise_swr((5, 3), np.random.default_rng(7))
        b = sample_noise_swr((5, 3), np.random.default_rng(7))
        assert a.size == 15 and np.array_equal(a, b)

    def test_per_sentence_noise_is_stable(self):
        a = noise_for_tokens(("the", "cat"), 4, 0)
        assert np.array_equal(a, noise_for_tokens(("the", "cat"), 4, 0))
        assert not np.array_equal(a, noise_for_tokens(("the", "dog"), 4, 0))


class TestParameterCounts:
    @pytest.mark.parametrize("arch", ["da", "esim"])
    def test_attention_fusion_adds_nothing(self, arch):
        assert count_parameters(tiny_network(arch, "sa")) == count_parameters(tiny_network(arch, "baseline"))

    def test_late_fusion_delta_hand_value(self):
        def da(fusion):
            return build_model("da", tiny_config("da").__class__(6, 5, 8, 0, 0, 0), 10, EMBED, 3,
                               np.random.default_rng(0), fusion, 16 if fusion != "baseline" else 0)
        assert count_parameters(da("lf")) - count_parameters(da("baseline")) == 256

    @pytest.mark.parametrize("arch", ["da", "esim"])
    def test_noise_variants_match_their_counterparts(self, arch):
        assert count_parameters(tiny_network(arch, "lf_noise")) == count_parameters(tiny_network(arch, "lf"))
        assert count_parameters(tiny_network(arch, "sa_noise")) == count_parameters(tiny_network(arch, "sa"))

    def test_frozen_embeddings_not_counted(self):
        a = build_model("da", tiny_config("da"), 10, EMBED, 3, np.random.default_rng(0))
        b = build_model("da", tiny_config("da"), 10, EMBED, 3, np.random.default_rng(0),
                        train_embeddings=False)
        assert count_parameters(a) - count_parameters(b) == 10 * EMBED


@pytest.mark.parametrize("arch", ["da", "esim"])
@pytest.mark.parametrize("fusion", ["baseline", "lf", "sa"])
def test_full_model_gradients(arch, fusion):
    report = full_model_grad_check(arch, fusion, seed=0)
    assert report.passed, report


# -- estimators ----------------------------------------------------------------------

def toy_pairs():
    data = [("a cat sleeps", "a cat sleeps", "entailment"),
            ("a dog runs", "a cat sleeps", "neutral"),
            ("the man eats", "the man eats", "entailment"),
            ("the man eats", "a dog runs", "neutral"),
            ("birds sing", "birds sing", "entailment"),
            ("birds sing", "the man eats", "neutral")]
    return [NLIExample.from_text(p, h, y) for p, h, y in data]


SMALL = dict(embed_dim=8, attend_hidden=8, compare_hidden=8, aggregate_hidden=8, attend_dropout=0.0,
             compare_dropout=0.0, aggregate_dropout=0.0, label_set="2way", lr=0.01, batch_size=4)


@pytest.fixture(scope="module")
def frozen_parser():
    return BiaffineParser(embed_dim=8, encoder_hidden=4, encoder_layers=1, arc_mlp_dim=4,
                          label_mlp_dim=4, epochs=2).fit(make_treebank(20, seed=0)).freeze()


class TestEstimator:
    def test_overfits_tiny_set(self):
        data = toy_pairs() * 3 + toy_pairs()[:2]
        model = DecomposableAttentionClassifier(epochs=300, **SMALL).fit(data)
        assert model.score(data) == 1.0

    def test_same_seed_same_history(self):
        a = DecomposableAttentionClassifier(epochs=3, **SMALL).fit(toy_pairs(), validation_data=toy_pairs())
        b = DecomposableAttentionClassifier(epochs=3, **SMALL).fit(toy_pairs(), validation_data=toy_pairs())
        strip = [{k: v for k, v in h.items() if k != "seconds"} for h in a.history_]
        assert strip == [{k: v for k, v in h.items() if k != "seconds"} for h in b.history_]

    def test_zero_patience_stops_one_epoch_after_best(self):
        model = DecomposableAttentionClassifier(epochs=50, patience=0, **SMALL)
        model.fit(toy_pairs(), validation_data=toy_pairs())
        dev = [h["dev_accuracy"] for h in model.history_]
        best = int(np.argmax(dev))
        if len(dev) < 50:
            assert len(dev) == best + 2

    def test_sklearn_protocol(self):
        model = DecomposableAttentionClassifier(epochs=1, **SMALL)
        twin = clone(model)
        assert twin.get_params() == model.get_params()
        fitted = model.fit(toy_pairs())
        assert fitted is model
        assert model.predict([("a cat sleeps", "a dog runs")]).shape == (1,)
        proba = model.predict_proba([("a cat sleeps", "a dog runs")])
        assert proba.shape == (1, 2) and abs(proba.sum() - 1) < 1e-12

    def test_constant_logits_score_one_third(self):
        pairs = [NLIExample.from_text("a b", "c d", lab)
                 for lab in ("entailment", "contradiction", "neutral") * 4]
        model = DecomposableAttentionClassifier(epochs=1, **{**SMALL, "label_set": "3way"}).fit(pairs)
        head = model.network_.head
        head.out.weight.data[:] = 0.0
        head.out.bias.data[:] = 0.0
        assert evaluate_accuracy(model, pairs) == pytest.approx(1 / 3)

    def test_unknown_label(self):
        bad = [NLIExample.from_text("a", "b", "contradiction")]
        with pytest.raises(LabelError):
            DecomposableAttentionClassifier(epochs=1, **SMALL).fit(bad)

    def test_empty_train(self):
        with pytest.raises(ContractError):
            DecomposableAttentionClassifier(**SMALL).fit([])

    def test_empty_split_score(self):
        model = DecomposableAttentionClassifier(epochs=1, **SMALL).fit(toy_pairs())
        with pytest.raises(ContractError):
            evaluate_accuracy(model, [])

    def test_requires_frozen_parser(self):
        parser = BiaffineParser(embed_dim=8, encoder_hidden=4, encoder_layers=1, arc_mlp_dim=4,
                                label_mlp_dim=4, epochs=1).fit(make_treebank(10, seed=0))
        with pytest.raises(FrozenParserError):
            DecomposableAttentionClassifier(fusion="sa", parser=parser, **SMALL).fit(toy_pairs())

    @pytest.mark.parametrize("fusion", ["lf", "sa"])
    def test_parser_bytes_unchanged(self, frozen_parser, fusion):
        before = frozen_parser.model_.parameter_bytes()
        DecomposableAttentionClassifier(fusion=fusion, parser=frozen_parser, epochs=2, **SMALL).fit(toy_pairs())
        assert frozen_parser.model_.parameter_bytes() == before

    def test_noise_needs_dimension(self):
        with pytest.raises(ContractError):
            DecomposableAttentionClassifier(fusion="sa_noise", epochs=1, **SMALL).fit(toy_pairs())
        model = DecomposableAttentionClassifier(fusion="sa_noise", swr_dim=SWR, epochs=1, **SMALL)
        assert model.fit(toy_pairs()).swr_dim_ == SWR

    def test_per_example_noise_gives_stable_predictions(self):
        model = DecomposableAttentionClassifier(fusion="lf_noise", swr_dim=SWR, epochs=2,
                                                noise_sampling="per_example", **SMALL).fit(toy_pairs())
        assert np.array_equal(model.decision_function(toy_pairs()), model.decision_function(toy_pairs()))

    def test_esim_estimator_runs(self, frozen_parser):
        model = ESIMClassifier(fusion="lf", parser=frozen_parser, embed_dim=6, encoder_hidden=4,
                               composition_hidden=4, output_hidden=4, epochs=1, label_set="2way")
        model.fit(toy_pairs(), validation_data=toy_pairs())
        assert 0.0 <= model.score(toy_pairs()) <= 1.0
        assert model.n_parameters_ > 0
