import csv

import numpy as np
import pytest

from _oracles import finite_diff_grads, max_rel_err, pointwise_mean
from fednam.data import HEART, SplitSpec, load_dataset
from fednam.dnn import build_dnn
from fednam.errors import DataError, ShapeMismatchError
from fednam.federation import ClientState, FederationConfig
from fednam.interpret import (
    GLOBAL_OWNER,
    average_shape_functions,
    baseline_attributions,
    contribution_scores,
    export_reports,
    global_interpret,
    input_gradient_attributions,
    model_curves,
    render_shapes_svg,
    sample_shape_curve,
)
from fednam.nam import NamModel, build_nam, FeatureNet
from fednam.nn import BINARY, IDENTITY, LayerParams, Mlp, OptimizerState
from conftest import write_csv, synthetic_heart_rows, HEART_COLUMNS


def identity_net(k, scale=1.0):
    return FeatureNet(Mlp([LayerParams(np.array([[scale]]), np.zeros(1))], [IDENTITY]), k)


def linear_nam(scales, out_weights, bias=0.0):
    nets = [identity_net(k, s) for k, s in enumerate(scales)]
    return NamModel(nets, np.array([out_weights], dtype=float),
                    np.array([bias]), BINARY)


class TestShapeCurves:
    def test_zero_net_flat_curve(self):
        model = linear_nam([0.0], [1.0])
        curve = sample_shape_curve(model, 0, 0, (-1.0, 1.0), "client1")
        assert np.all(curve.values == 0.0)
        assert len(curve.grid) == 101

    def test_identity_shape_already_centered(self):
        model = linear_nam([1.0], [1.0])
        curve = sample_shape_curve(model, 0, 0, (-1.0, 1.0), "client1")
        assert np.allclose(curve.values, curve.grid, atol=1e-15)
        assert curve.center == pytest.approx(0.0, abs=1e-15)

    def test_centering_over_random_models(self):
        for seed in range(100):
            model = build_nam(1, BINARY, hidden_layers=1, hidden_units=6, rng=seed)
            curve = sample_shape_curve(model, 0, 0, (-2.0, 2.0), "x")
            assert abs(curve.values.mean()) <= 1e-9

    def test_curve_plus_center_reproduces_model(self):
        from fednam.nam import effective_shape

        model = build_nam(2, BINARY, hidden_layers=2, hidden_units=6, rng=3)
        curve = sample_shape_curve(model, 1, 0, (-1.5, 2.5), "x")
        raw = effective_shape(model, 1, 0, curve.grid)
        assert np.all(np.abs((curve.values + curve.center) - raw) <= 1e-9)

    def test_degenerate_range_single_point(self):
        model = linear_nam([1.0], [1.0])
        with pytest.warns(UserWarning, match="degenerate"):
            curve = sample_shape_curve(model, 0, 0, (2.0, 2.0), "x")
        assert len(curve.grid) == 1


class TestAverageShapeFunctions:
    def test_linear_example(self):
        # client shapes x and 3x evaluated at x=2 average to 4
        a = model_curves(linear_nam([1.0], [1.0]), [(0.0, 2.0)], "client1")
        b = model_curves(linear_nam([3.0], [1.0]), [(0.0, 2.0)], "client2")
        merged = average_shape_functions([a, b])[0]
        raw_at_end = merged.values[-1] + merged.center
        assert raw_at_end == pytest.approx(4.0, abs=1e-12)

    def test_identical_clients_unchanged(self):
        curves = model_curves(build_nam(2, BINARY, hidden_layers=1, hidden_units=5, rng=4),
                              [(-1, 1), (-2, 2)], "c")
        merged = average_shape_functions([curves, curves, curves])
        for got, ref in zip(merged, curves):
            assert np.allclose(got.values, ref.values, atol=1e-15)
            assert got.owner == GLOBAL_OWNER

    def test_matches_pointwise_mean_oracle_exactly(self):
        ranges = [(-2.0, 2.0), (0.0, 1.0), (-1.0, 3.0)]
        per_client = [
            model_curves(build_nam(3, BINARY, hidden_layers=1, hidden_units=7, rng=seed),
                         ranges, f"client{seed}")
            for seed in range(3)
        ]
        merged = average_shape_functions(per_client)
        for i, curve in enumerate(merged):
            oracle = pointwise_mean([c[i].values for c in per_client])
            assert np.array_equal(curve.values, oracle)

    def test_grid_mismatch_rejected(self):
        a = model_curves(linear_nam([1.0], [1.0]), [(0.0, 2.0)], "c1")
        b = model_curves(linear_nam([1.0], [1.0]), [(0.0, 3.0)], "c2")
        with pytest.raises(ShapeMismatchError, match="grid mismatch"):
            average_shape_functions([a, b])


class TestContributions:
    def test_zero_model_all_zero(self):
        model = linear_nam([0.0, 0.0], [1.0, 1.0])
        report = contribution_scores(model, np.ones((5, 2)), "c", ["a", "b"])
        assert np.all(report.scores == 0.0)

    def test_mean_absolute_value_example(self):
        model = linear_nam([1.0, 0.0], [1.0, 1.0])
        data = np.array([[-2.0, 5.0], [2.0, -5.0]])
        report = contribution_scores(model, data, "c", ["g1", "g2"])
        assert report.scores[0] == 2.0
        assert report.scores[1] == 0.0
        assert report.ranking == [0, 1]
        assert report.rank_of("g1") == 1

    def test_output_weight_scaling_scales_score(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            model = build_nam(3, BINARY, hidden_layers=1, hidden_units=5, rng=seed)
            data = rng.normal(size=(40, 3))
            base = contribution_scores(model, data, "c", ["a", "b", "c"])
            boosted = model.copy()
            tensors = boosted.param_tensors()
            w = tensors[-2].copy()
            w[0, 1] *= 10.0
            tensors[-2] = w
            boosted.set_param_tensors(tensors)
            after = contribution_scores(boosted, data, "c", ["a", "b", "c"])
            assert after.scores[1] == pytest.approx(10.0 * base.scores[1], rel=1e-12)
            assert after.rank_of("b") <= base.rank_of("b")

    def test_empty_data_rejected(self):
        model = linear_nam([1.0], [1.0])
        with pytest.raises(DataError):
            contribution_scores(model, np.empty((0, 1)), "c", ["a"])


class TestGlobalInterpret:
    def make_clients(self, n_clients=3, identical=False):
        clients = []
        x = np.random.default_rng(0).normal(size=(30, 2))
        y = (x.sum(axis=1) > 0).astype(int)
        for cid in range(n_clients):
            model = build_nam(2, BINARY, hidden_layers=1, hidden_units=5,
                              rng=0 if identical else cid)
            clients.append(
                ClientState(cid, x, y, model, OptimizerState(learning_rate=0.01),
                            np.arange(27), np.arange(27, 30))
            )
        return clients, x

    def test_identical_clients_global_equals_client(self):
        clients, x = self.make_clients(identical=True)
        bundle = global_interpret(clients, clients[0].model, x, ["a", "b"])
        client_report = bundle.client_contributions[0]
        assert np.allclose(bundle.global_contribution.scores, client_report.scores, atol=1e-12)
        per_feature = {(c.feature_index, c.class_index): c for c in bundle.global_curves}
        for curve in bundle.client_curves[: len(bundle.global_curves)]:
            merged = per_feature[(curve.feature_index, curve.class_index)]
            assert np.allclose(merged.values, curve.values, atol=1e-15)

    def test_counts(self):
        clients, x = self.make_clients()
        bundle = global_interpret(clients, clients[0].model, x, ["a", "b"])
        assert len(bundle.client_contributions) == 3
        assert len(bundle.client_curves) == 3 * 2  # owners x features (binary: 1 class)
        assert len(bundle.global_curves) == 2


class TestAttributions:
    def test_linear_model_closed_form(self):
        # logit = sum w_k x_k has constant gradient w, so grad*input averages
        # to w_k * mean(x_k) over the rows
        rng = np.random.default_rng(1)
        w = np.array([[0.7, -1.3, 0.4]])
        mlp = Mlp([LayerParams(w, np.zeros(1))], [IDENTITY])
        from fednam.dnn import DnnModel

        model = DnnModel(mlp, BINARY)
        x = rng.normal(size=(200, 3))
        report = input_gradient_attributions(model, x, ["a", "b", "c"])
        expected = w[0] * x.mean(axis=0)
        assert np.allclose(report.values, expected, atol=1e-12)

    def test_zero_network_zero_attributions(self):
        mlp = Mlp([LayerParams(np.zeros((1, 3)), np.zeros(1))], [IDENTITY])
        from fednam.dnn import DnnModel

        model = DnnModel(mlp, BINARY)
        report = input_gradient_attributions(model, np.ones((10, 3)), ["a", "b", "c"])
        assert np.all(report.values == 0.0)

    def test_input_gradients_match_finite_differences(self):
        model = build_dnn(4, BINARY, hidden_layers=2, hidden_units=10, rng=5)
        x = np.random.default_rng(5).normal(size=(3, 4))

        def logit_sum():
            logits, _ = model.forward_batch(x)
            return float(logits.sum())

        grads = model.input_gradients(x, np.ones((3, 1)))
        numeric = finite_diff_grads(logit_sum, [x])
        assert max_rel_err([grads], numeric) < 1e-4

    def test_federated_baseline_pipeline(self, tmp_path):
        path = write_csv(tmp_path / "h.csv", HEART_COLUMNS, synthetic_heart_rows(160))
        dataset = load_dataset(path, HEART, SplitSpec(seed=0))
        cfg = FederationConfig(num_clients=2, rounds=2, local_epochs=1, seed=0)
        model, report, stats = baseline_attributions(
            dataset, cfg, lambda: OptimizerState(learning_rate=0.01),
            batch_size=16, hidden_layers=1, hidden_units=8,
        )
        assert len(report.values) == 13
        assert np.all(np.isfinite(report.values))
        assert 0.0 <= stats["accuracy"] <= 1.0


class TestExport:
    def build_bundle(self):
        clients, x = TestGlobalInterpret().make_clients()
        return global_interpret(clients, clients[0].model, x, ["a", "b"]), x

    def test_contribution_row_count(self, tmp_path):
        bundle, _ = self.build_bundle()
        export_reports(bundle, tmp_path)
        with open(tmp_path / "contributions.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2 * (3 + 1)  # features x (clients + global)
        owners = {r["owner"] for r in rows}
        assert owners == {"client1", "client2", "client3", "global"}

    def test_shapes_roundtrip_full_precision(self, tmp_path):
        bundle, _ = self.build_bundle()
        export_reports(bundle, tmp_path)
        by_key = {}
        with open(tmp_path / "shapes.csv") as f:
            for row in csv.DictReader(f):
                by_key.setdefault(
                    (row["owner"], row["feature"], int(row["class"])), []
                ).append(float(row["value"]))
        for curve in bundle.global_curves:
            name = bundle.feature_names[curve.feature_index]
            parsed = np.array(by_key[(GLOBAL_OWNER, name, curve.class_index)])
            assert np.array_equal(parsed, curve.values)

    def test_svg_renders(self, tmp_path):
        bundle, _ = self.build_bundle()
        export_reports(bundle, tmp_path, svg=True)
        text = (tmp_path / "shapes.svg").read_text()
        assert text.startswith("<svg") and "polyline" in text
        assert render_shapes_svg(bundle).startswith("<svg")

    def test_synthetic_heart_emits_52_contribution_rows(self, tmp_path, synthetic_heart_csv):
        dataset = load_dataset(synthetic_heart_csv, HEART, SplitSpec(seed=0))
        from fednam.federation import run_federation
        from fednam.nam import build_nam as bn

        cfg = FederationConfig(num_clients=3, rounds=2, local_epochs=1, seed=0)
        result = run_federation(
            dataset, cfg,
            lambda rng: bn(13, BINARY, hidden_layers=1, hidden_units=6, rng=rng),
            lambda: OptimizerState(learning_rate=0.01), batch_size=32,
        )
        bundle = global_interpret(result.clients, result.global_model,
                                  dataset.X_train, dataset.feature_names)
        export_reports(bundle, tmp_path)
        with open(tmp_path / "contributions.csv") as f:
            rows = list(csv.reader(f))
        assert len(rows) - 1 == 13 * 4
