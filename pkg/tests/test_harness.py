import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bovw.codebook import build_random_codebook
from bovw.corpus import DatasetManifest, ManifestEntry, load_image, load_manifest
from bovw.encoding import EncodingParams, encode_image
from bovw.features import GridParams
from bovw.harness import (
    CSV_COLUMNS,
    SPLIT_SEED_OFFSET,
    PipelineParams,
    SplitSpec,
    confidence_interval,
    cross_base_experiment,
    diversity_sweep,
    run_trial,
    split_balanced,
    write_summary_csv,
)
from bovw.synth import CORPUS_PRESETS, TextureSpec, generate_corpus, render_texture


def toy_manifest(sizes: dict[str, int]) -> DatasetManifest:
    entries = [
        ManifestEntry(f"{label}/{i}.pgm", label)
        for label in sorted(sizes)
        for i in range(sizes[label])
    ]
    return DatasetManifest(name="toy", entries=tuple(entries))


class TestSplitBalanced:
    def test_remainder_rule(self):
        m = toy_manifest({"a": 4, "b": 6})
        train, test = split_balanced(m, 3, seed=0)
        assert len(train.entries_for_class("a")) == 3
        assert len(test.entries_for_class("a")) == 1
        assert len(test.entries_for_class("b")) == 3

    def test_deterministic(self):
        m = toy_manifest({"a": 5, "b": 5, "c": 7})
        assert split_balanced(m, 2, seed=9) == split_balanced(m, 2, seed=9)

    def test_class_too_small_names_class(self):
        m = toy_manifest({"a": 3, "tiny": 2})
        with pytest.raises(ValueError, match="'tiny' has 2"):
            split_balanced(m, 2, seed=0)

    @settings(max_examples=40)
    @given(
        n_a=st.integers(min_value=3, max_value=10),
        n_b=st.integers(min_value=3, max_value=10),
        n_train=st.integers(min_value=1, max_value=2),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_partition(self, n_a, n_b, n_train, seed):
        m = toy_manifest({"a": n_a, "b": n_b})
        train, test = split_balanced(m, n_train, seed=seed)
        assert set(train.entries).isdisjoint(test.entries)
        assert sorted(train.entries + test.entries) == sorted(m.entries)
        assert all(len(train.entries_for_class(c)) == n_train for c in ("a", "b"))


class TestConfidenceInterval:
    def test_zero_variance(self):
        assert confidence_interval([0.4, 0.4, 0.4]) == (0.4, 0.4, 0.4)

    def test_hand_computed_case(self):
        mean, low, high = confidence_interval([0.0, 0.0, 0.0, 0.0, 1.0], alpha=0.05)
        assert mean == pytest.approx(0.2, abs=1e-12)
        assert low == pytest.approx(-0.3553, abs=1e-3)
        assert high == pytest.approx(0.7553, abs=1e-3)

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            confidence_interval([0.5])

    def test_unsupported_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            confidence_interval([0.1, 0.2], alpha=0.07)

    def test_ordering_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            vals = rng.uniform(0, 1, rng.integers(2, 40))
            mean, low, high = confidence_interval(vals.tolist())
            assert low <= mean <= high

    def test_table_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(1)
        for alpha in (0.10, 0.05, 0.01):
            for n in (2, 3, 5, 8, 20, 31):
                vals = rng.uniform(0, 1, n).tolist()
                mean, low, high = confidence_interval(vals, alpha=alpha)
                t = scipy_stats.t.ppf(1 - alpha / 2, n - 1)
                s = np.std(vals, ddof=1)
                assert high - mean == pytest.approx(t * s / np.sqrt(n), rel=2e-4)

    def test_large_n_uses_normal_limit(self):
        vals = [0.0, 1.0] * 20  # n = 40, beyond the table
        mean, low, high = confidence_interval(vals, alpha=0.05)
        s = np.std(vals, ddof=1)
        assert high - mean == pytest.approx(1.96 * s / np.sqrt(40), rel=1e-4)


@pytest.fixture(scope="module")
def micro_params():
    return PipelineParams(grid=GridParams(), encoding=EncodingParams(), k=24, epochs=30)


class TestRunTrial:
    def test_own_dictionary_beats_chance(self, micro_corpus, micro_store, micro_params):
        train_m, _ = split_balanced(micro_corpus, 4, seed=100)
        cb = build_random_codebook(micro_store.pool(train_m), micro_params.k, seed=0,
                                   source_name="micro")
        result = run_trial(cb, micro_corpus, 4, 0, micro_params, micro_store)
        assert result.accuracy > 0.5
        # brute-force sanity: classes separate in bow space by nearest centroid
        bows, labels = [], []
        for e in micro_corpus.entries:
            bows.append(encode_image(micro_store.get(micro_corpus, e), cb,
                                     micro_params.encoding).h)
            labels.append(e.label)
        bows = np.array(bows)
        classes = sorted(set(labels))
        centroids = {c: bows[[l == c for l in labels]].mean(axis=0) for c in classes}
        hits = 0
        for v, l in zip(bows, labels):
            nearest = min(classes, key=lambda c: float(np.linalg.norm(v - centroids[c])))
            hits += nearest == l
        assert hits / len(labels) > 0.5

    def test_k1_collapses_to_majority_rate(self, micro_corpus, micro_store, micro_params):
        params = PipelineParams(grid=micro_params.grid, encoding=micro_params.encoding,
                                k=1, epochs=micro_params.epochs)
        cb = build_random_codebook(micro_store.pool(micro_corpus), 1, seed=1,
                                   source_name="micro")
        bows = [encode_image(micro_store.get(micro_corpus, e), cb, params.encoding).h
                for e in micro_corpus.entries]
        assert all(np.array_equal(b, bows[0]) for b in bows)
        result = run_trial(cb, micro_corpus, 4, 0, params, micro_store)
        _, test_m = split_balanced(micro_corpus, 4, seed=0 + SPLIT_SEED_OFFSET)
        counts = [len(test_m.entries_for_class(c)) for c in test_m.class_labels]
        assert result.accuracy == max(counts) / len(test_m)

    def test_deterministic(self, micro_corpus, micro_store, micro_params):
        cb = build_random_codebook(micro_store.pool(micro_corpus), micro_params.k, seed=2,
                                   source_name="micro")
        a = run_trial(cb, micro_corpus, 4, 3, micro_params, micro_store)
        b = run_trial(cb, micro_corpus, 4, 3, micro_params, micro_store)
        assert a == b


class TestExperiments:
    def test_crossbase_same_source_matches_native(self, micro_corpus, micro_store, micro_params):
        spec = SplitSpec(n_train_per_class=4, run_seeds=(0, 1))
        rows = cross_base_experiment(micro_corpus, micro_corpus, [4], spec, micro_params,
                                     store=micro_store)
        assert len(rows) == 2
        native, cross = rows
        assert native.mean_acc == cross.mean_acc
        assert native.ci_low == cross.ci_low

    def test_crossbase_row_echo_swaps_with_arguments(self, micro_corpus, micro_store,
                                                     micro_params, tmp_path):
        half_a = DatasetManifest("half_a", micro_corpus.entries[0::2], micro_corpus.base_dir)
        half_b = DatasetManifest("half_b", micro_corpus.entries[1::2], micro_corpus.base_dir)
        spec = SplitSpec(n_train_per_class=2, run_seeds=(0, 1))
        fwd = cross_base_experiment(half_a, half_b, [2], spec, micro_params, store=micro_store)
        rev = cross_base_experiment(half_b, half_a, [2], spec, micro_params, store=micro_store)
        assert [(r.dict_source, r.target) for r in fwd] == [("half_b", "half_b"),
                                                            ("half_a", "half_b")]
        assert [(r.dict_source, r.target) for r in rev] == [("half_a", "half_a"),
                                                            ("half_b", "half_a")]

    def test_n_runs_recorded(self, micro_corpus, micro_store, micro_params):
        spec = SplitSpec(n_train_per_class=3, run_seeds=(0, 1, 2, 3, 4))
        rows = cross_base_experiment(micro_corpus, micro_corpus, [3], spec, micro_params,
                                     store=micro_store, include_native=False)
        assert rows[0].n_runs == 5

    def test_workers_do_not_change_results(self, micro_corpus, micro_store, micro_params):
        spec = SplitSpec(n_train_per_class=3, run_seeds=(0, 1, 2))
        serial = cross_base_experiment(micro_corpus, micro_corpus, [3], spec, micro_params,
                                       store=micro_store, include_native=False)
        threaded_params = PipelineParams(grid=micro_params.grid, encoding=micro_params.encoding,
                                         k=micro_params.k, epochs=micro_params.epochs, workers=4)
        threaded = cross_base_experiment(micro_corpus, micro_corpus, [3], spec, threaded_params,
                                         store=micro_store, include_native=False)
        assert serial == threaded

    def test_sweep_full_count_equals_full_source_dictionary(self, micro_corpus, micro_store,
                                                            micro_params):
        spec = SplitSpec(n_train_per_class=3, run_seeds=(0, 1))
        rows = diversity_sweep(micro_corpus, [3], micro_corpus, 3, spec, micro_params,
                               store=micro_store)
        native = cross_base_experiment(micro_corpus, micro_corpus, [3], spec, micro_params,
                                       store=micro_store, include_native=False)
        assert rows[0].mean_acc == native[0].mean_acc

    def test_sweep_unsorted_counts_rejected(self, micro_corpus, micro_store, micro_params):
        spec = SplitSpec(n_train_per_class=3, run_seeds=(0,))
        with pytest.raises(ValueError, match="sorted"):
            diversity_sweep(micro_corpus, [3, 1], micro_corpus, 3, spec, micro_params,
                            store=micro_store)

    def test_sweep_count_beyond_classes_rejected(self, micro_corpus, micro_store, micro_params):
        spec = SplitSpec(n_train_per_class=3, run_seeds=(0,))
        with pytest.raises(ValueError, match="exceeds"):
            diversity_sweep(micro_corpus, [9], micro_corpus, 3, spec, micro_params,
                            store=micro_store)


class TestSummaryCsv:
    def _row(self):
        from bovw.harness import SummaryRow

        return SummaryRow("crossbase", "src", "all", "tgt", 5, 100, 60.0, "soft", "max",
                          5, 0.5, 0.4, 0.6)

    def test_header_then_append(self, tmp_path):
        path = tmp_path / "out.csv"
        write_summary_csv([self._row()], path)
        write_summary_csv([self._row()], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3
        assert lines[1] == lines[2]

    def test_row_contents(self, tmp_path):
        path = tmp_path / "out.csv"
        write_summary_csv([self._row()], path)
        fields = path.read_text().strip().splitlines()[1].split(",")
        assert fields[0] == "crossbase"
        assert fields[4] == "5"
        assert float(fields[10]) == 0.5


class TestSynth:
    def test_deterministic_generation(self, tmp_path):
        spec = (TextureSpec("g", "grating", 0.1, 30.0),)
        m1 = generate_corpus(tmp_path / "a", spec, 2, size=32, seed=9, name="s")
        m2 = generate_corpus(tmp_path / "b", spec, 2, size=32, seed=9, name="s")
        a = load_image(load_manifest(m1).resolve(load_manifest(m1).entries[0]))
        b = load_image(load_manifest(m2).resolve(load_manifest(m2).entries[0]))
        assert np.array_equal(a.pixels, b.pixels)

    def test_presets_have_expected_classes(self):
        assert len(CORPUS_PRESETS["textures8"]()) == 8
        assert len(CORPUS_PRESETS["textures3"]()) == 3
        names8 = {s.name for s in CORPUS_PRESETS["textures8"]()}
        names3 = {s.name for s in CORPUS_PRESETS["textures3"]()}
        assert not names8 & names3

    def test_render_respects_bounds(self):
        img = render_texture(TextureSpec("c", "checker", 0.07, 10.0), 48,
                             np.random.default_rng(0))
        assert img.pixels.shape == (48, 48)
        assert img.pixels.dtype == np.uint8

    def test_manifest_loads_and_images_open(self, micro_corpus):
        assert len(micro_corpus.class_labels) == 3
        img = load_image(micro_corpus.resolve(micro_corpus.entries[0]))
        assert img.width == 48


class TestCli:
    def run(self, *argv):
        return subprocess.run([sys.executable, "-m", "bovw", *argv],
                              capture_output=True, text=True)

    def test_pipeline_commands(self, tmp_path, micro_corpus):
        manifest = str(micro_corpus.base_dir / "micro.manifest")
        cache = str(tmp_path / "cache")
        out = self.run("extract", "--manifest", manifest, "--cache-dir", cache)
        assert out.returncode == 0, out.stderr
        out = self.run("codebook", "--manifest", manifest, "--k", "16", "--seed", "1",
                       "--cache-dir", cache, "--out", str(tmp_path / "cb.bin"))
        assert out.returncode == 0, out.stderr
        out = self.run("encode", "--manifest", manifest, "--codebook", str(tmp_path / "cb.bin"),
                       "--cache-dir", cache, "--out", str(tmp_path / "bows.bin"))
        assert out.returncode == 0, out.stderr
        out = self.run("train", "--bows", str(tmp_path / "bows.bin"), "--manifest", manifest,
                       "--out", str(tmp_path / "model.bin"))
        assert out.returncode == 0, out.stderr
        out = self.run("eval", "--bows", str(tmp_path / "bows.bin"), "--manifest", manifest,
                       "--model", str(tmp_path / "model.bin"))
        assert out.returncode == 0, out.stderr
        assert out.stdout.startswith("accuracy\t")

    def test_experiment_defaults_match_protocol(self):
        # the documented defaults: stride 6, patch 16, k 1000, sigma 60,
        # soft assignment, max pooling, 5 runs, alpha 0.05
        from bovw.cli import build_parser

        args = build_parser().parse_args(
            ["crossbase", "--source", "s", "--target", "t", "--ntrain", "30", "--out", "o"]
        )
        assert (args.stride, args.patch, args.k) == (6, 16, 1000)
        assert (args.sigma, args.assignment, args.pooling) == (60.0, "soft", "max")
        assert (args.runs, args.alpha, args.workers) == (5, 0.05, 1)
        sweep = build_parser().parse_args(
            ["sweep", "--source", "s", "--target", "t", "--out", "o"]
        )
        assert sweep.class_counts == [1, 6, 12, 25, 50, 101]
        assert sweep.ntrain == 30

    def test_crossbase_command_writes_csv(self, tmp_path, micro_corpus):
        manifest = str(micro_corpus.base_dir / "micro.manifest")
        csv_path = tmp_path / "res.csv"
        out = self.run("crossbase", "--source", manifest, "--target", manifest,
                       "--ntrain", "3", "--k", "12", "--runs", "2", "--seed", "0",
                       "--out", str(csv_path))
        assert out.returncode == 0, out.stderr
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3
