import numpy as np
import pytest
from scipy import stats

from swrnli.ablation import (ABLATION_MODES, EvalReport, ablation_suite, ablation_table, ablation_tsv,
                             read_ablation_tsv)
from swrnli.checkpoint import (Checkpoint, dumps, load_model, load_nli, load_parser, loads,
                               read_checkpoint, save_model, write_checkpoint)
from swrnli.config import apply_overrides, config_hash, dump_config, estimator_kwargs, load_config
from swrnli.data import NLIExample
from swrnli.exceptions import (CheckpointError, CheckpointShapeError, CheckpointVersionError,
                               ContractError, ModelKindError, TruncatedCheckpointError)
from swrnli.nli import DecomposableAttentionClassifier, ESIMClassifier
from swrnli.parser import BiaffineParser
from swrnli.search import DA_SPACE, HyperparamSpace, Range, random_search, trials_tsv
from swrnli.synthetic import make_order_task, make_treebank

SMALL = dict(embed_dim=8, attend_hidden=8, compare_hidden=8, aggregate_hidden=8, attend_dropout=0.1,
             compare_dropout=0.1, aggregate_dropout=0.1, label_set="2way", batch_size=16, epochs=2)


@pytest.fixture(scope="module")
def parser():
    return BiaffineParser(embed_dim=8, encoder_hidden=6, encoder_layers=1, arc_mlp_dim=6,
                          label_mlp_dim=4, epochs=2).fit(make_treebank(30, seed=0)).freeze()


@pytest.fixture(scope="module")
def task():
    splits = make_order_task(90, seed=5)
    return splits["train"], splits["dev"], splits["test"]


class TestCheckpointFormat:
    ckpt = Checkpoint("nli/da", {"a": [1, 2]}, {"w": np.arange(6.0).reshape(2, 3), "b": np.array([0.1])},
                      {"note": "x"})

    def test_round_trip(self):
        raw = dumps(self.ckpt)
        back = loads(raw)
        assert back.kind == "nli/da" and back.config == {"a": [1, 2]}
        assert all(np.array_equal(back.tensors[k], v) for k, v in self.ckpt.tensors.items())
        assert dumps(back) == raw

    def test_one_byte_short(self):
        with pytest.raises(TruncatedCheckpointError):
            loads(dumps(self.ckpt)[:-1])

    def test_version_mismatch(self):
        ckpt = Checkpoint(self.ckpt.kind, self.ckpt.config, self.ckpt.tensors, version=2)
        with pytest.raises(CheckpointVersionError):
            loads(dumps(ckpt))

    def test_bad_magic_and_trailing_bytes(self):
        with pytest.raises(CheckpointError):
            loads(b"NOTACKPT" + dumps(self.ckpt)[8:])
        with pytest.raises(CheckpointError):
            loads(dumps(self.ckpt) + b"\x00")

    def test_file_helpers(self, tmp_path):
        write_checkpoint(self.ckpt, tmp_path / "c.bin")
        assert dumps(read_checkpoint(tmp_path / "c.bin")) == dumps(self.ckpt)


class TestModelCheckpoints:
    @pytest.mark.parametrize("fusion", ["baseline", "lf", "sa"])
    def test_da_bit_exact(self, tmp_path, parser, task, fusion):
        train, dev, _ = task
        model = DecomposableAttentionClassifier(fusion=fusion, parser=parser, **SMALL)
        model.fit(train, validation_data=dev)
        save_model(model, tmp_path / "m.bin")
        back = load_model(tmp_path / "m.bin")
        assert np.array_equal(back.decision_function(dev), model.decision_function(dev))
        assert back.network_.parameter_bytes() == model.network_.parameter_bytes()
        save_model(back, tmp_path / "again.bin")
        assert (tmp_path / "again.bin").read_bytes() == (tmp_path / "m.bin").read_bytes()

    def test_esim_bit_exact(self, tmp_path, parser, task):
        train, dev, _ = task
        model = ESIMClassifier(fusion="sa", parser=parser, embed_dim=6, encoder_hidden=4,
                               composition_hidden=4, output_hidden=4, epochs=1, label_set="2way")
        model.fit(train)
        save_model(model, tmp_path / "e.bin")
        assert np.array_equal(load_model(tmp_path / "e.bin").decision_function(dev),
                              model.decision_function(dev))

    def test_parser_round_trip(self, tmp_path, parser):
        save_model(parser, tmp_path / "p.bin")
        back = load_parser(tmp_path / "p.bin")
        assert back.frozen_ and back.model_.parameter_bytes() == parser.model_.parameter_bytes()

    def test_kind_mismatch(self, tmp_path, parser):
        save_model(parser, tmp_path / "p.bin")
        with pytest.raises(ModelKindError):
            load_nli(tmp_path / "p.bin")

    def test_shape_mismatch(self, tmp_path, parser):
        save_model(parser, tmp_path / "p.bin")
        ckpt = read_checkpoint(tmp_path / "p.bin")
        name = next(iter(ckpt.tensors))
        ckpt.tensors[name] = np.zeros(ckpt.tensors[name].shape + (1,))
        with pytest.raises(CheckpointShapeError):
            load_parser(ckpt)


class TestConfig:
    def test_load_and_override(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[run]\nseed = 3\n\n[da]\nlr = 3e-4\nattend_hidden = 200\nfusion = sa\n")
        cfg = load_config(path)
        assert cfg == {"run": {"seed": 3}, "da": {"lr": 3e-4, "attend_hidden": 200, "fusion": "sa"}}
        cfg2 = apply_overrides(cfg, ["da.lr=0.01", "parser.epochs=5"])
        assert cfg2["da"]["lr"] == 0.01 and cfg2["parser"] == {"epochs": 5} and cfg["da"]["lr"] == 3e-4
        assert load_config(self.dumped(tmp_path, cfg2)) == cfg2

    def dumped(self, tmp_path, cfg):
        path = tmp_path / "dumped.ini"
        path.write_text(dump_config(cfg))
        return path

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.ini")

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[trainer]\nx = 1\n")
        with pytest.raises(ContractError):
            load_config(path)

    def test_bad_override(self):
        with pytest.raises(ContractError):
            apply_overrides({}, ["lr=3"])

    def test_hash_ignores_key_order(self):
        assert config_hash({"a": {"x": 1, "y": 2}}) == config_hash({"a": {"y": 2, "x": 1}})
        assert config_hash({"a": {"x": 1}}) != config_hash({"a": {"x": 2}})

    def test_unknown_estimator_parameter(self):
        with pytest.raises(ContractError):
            estimator_kwargs(DecomposableAttentionClassifier, {"hidden": 3})


class TestSearchSpace:
    def test_log_uniform_exponents_are_uniform(self):
        rng = np.random.default_rng(0)
        r = Range(-6, 0, "log-uniform")
        exponents = np.log10([r.sample(rng) for _ in range(1000)])
        counts, _ = np.histogram(exponents, bins=10, range=(-6, 0))
        assert stats.chisquare(counts).pvalue > 0.01

    def test_integer_range_hits_both_ends(self):
        rng = np.random.default_rng(1)
        draws = {Range(1, 3, integer=True).sample(rng) for _ in range(200)}
        assert draws == {1, 2, 3}

    def test_parse(self):
        assert Range.parse("100, 300, int") == Range(100, 300, "uniform", True)
        assert Range.parse(("-4", "-1", "log-uniform")).support == pytest.approx((1e-4, 1e-1))

    def test_bad_ranges(self):
        with pytest.raises(ContractError):
            Range(1, 1)
        with pytest.raises(ContractError):
            Range(0, 1, "gaussian")

    def test_da_space_fields(self):
        sample = DA_SPACE.sample(np.random.default_rng(0))
        assert 1e-6 <= sample["lr"] <= 1 and 100 <= sample["attend_hidden"] <= 300


class TestRandomSearch:
    def test_single_trial(self, task):
        train, dev, test = task
        space = HyperparamSpace({"lr": Range(-3, -2, "log-uniform")})
        result = random_search(DecomposableAttentionClassifier(**SMALL), space, 1, train, dev, test)
        assert len(result.trials) == 1 and result.best is result.trials[0]
        assert result.best.test_accuracy is not None and result.best_model is not None

    def test_selection_ignores_test(self, task):
        train, dev, test = task
        space = HyperparamSpace({"lr": Range(-4, -1, "log-uniform")})
        est = DecomposableAttentionClassifier(**SMALL)
        with_test = random_search(est, space, 3, train, dev, test, seed=2)
        without = random_search(est, space, 3, train, dev, None, seed=2)
        assert with_test.best.index == without.best.index
        best = max(t.dev_accuracy for t in with_test.trials)
        assert with_test.best.dev_accuracy == best
        assert with_test.best.index == min(t.index for t in with_test.trials if t.dev_accuracy == best)

    def test_failed_trial_is_recorded(self, task):
        train, dev, _ = task
        space = HyperparamSpace({"lr": Range(-0.01, 0.01)})
        result = random_search(DecomposableAttentionClassifier(**SMALL), space, 4, train, dev, seed=0)
        assert len(result.trials) == 4
        failed = [t for t in result.trials if t.failed]
        assert failed and all(t.dev_accuracy is None for t in failed)
        assert result.best is None or not result.best.failed
        assert "failed" in trials_tsv(result)

    def test_zero_trials(self, task):
        with pytest.raises(ContractError):
            random_search(DecomposableAttentionClassifier(**SMALL), DA_SPACE, 0, *task)


class TestAblation:
    def test_suite_rows_and_deltas(self, parser, task):
        train, dev, test = task
        reports = ablation_suite(DecomposableAttentionClassifier(**SMALL), train, dev, test, parser,
                                 dataset="order")
        assert [r.fusion for r in reports] == list(ABLATION_MODES)
        rows = read_ablation_tsv(ablation_tsv(reports))
        assert [r["model"] for r in rows] == ["DA", "DA+LF", "DA+LF_N", "DA+SA", "DA+SA_N"]
        assert float(rows[0]["delta_vs_baseline"]) == 0.0
        for row, rep in zip(rows, reports):
            assert float(row["test"]) == rep.accuracy("test")
        assert rows[0]["delta_vs_swr"] == "" and rows[2]["delta_vs_swr"] != ""
        assert len(ablation_table(reports).splitlines()) == 7

    def test_requires_frozen_parser(self, task):
        loose = BiaffineParser(embed_dim=8, encoder_hidden=4, encoder_layers=1, arc_mlp_dim=4,
                               label_mlp_dim=4, epochs=1).fit(make_treebank(10, seed=0))
        with pytest.raises(ContractError):
            ablation_suite(DecomposableAttentionClassifier(**SMALL), *task, loose)

    def test_delta_across_architectures_refused(self):
        a = EvalReport("da", "baseline", "snli", {"test": (5, 10)})
        b = EvalReport("esim", "baseline", "snli", {"test": (6, 10)})
        with pytest.raises(ContractError):
            a.delta(b, "test")
        assert EvalReport("da", "sa", "snli", {"test": (7, 10)}).delta(a, "test") == pytest.approx(0.2)

    def test_bad_counts(self):
        with pytest.raises(ContractError):
            EvalReport("da", "baseline", "snli", {"test": (11, 10)})


def test_nli_example_labels_are_strings(task):
    assert all(isinstance(ex, NLIExample) and isinstance(ex.label, str) for ex in task[0])
