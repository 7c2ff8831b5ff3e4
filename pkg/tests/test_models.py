import numpy as np
import pytest

from mfrc.data import RatingDataset
from mfrc.models import (DivergenceError, FactorModel, ModelFormatError,
                         ModelVersionError, SingularMatrixError, TrainConfig,
                         load_model, objective, save_model, sgd_step_mfrc,
                         train_alswr, train_biased_mf, train_mfrc,
                         train_plain_mf)
from mfrc.weighting import ReliabilityWeights, build_weights
from conftest import synthetic_dataset


def make_model(kind="mfrc", k=1, m=1, n=1, p=0.0, q=0.0, bu=0.0, bi=0.0,
               fallback=3.0, seen=True):
    return FactorModel(
        kind=kind, k=k, num_users=m, num_items=n,
        user_factors=np.full((m, k), p, dtype=float),
        item_factors=np.full((n, k), q, dtype=float),
        user_bias=np.full(m, bu, dtype=float),
        item_bias=np.full(n, bi, dtype=float),
        user_seen=np.full(m, seen, dtype=bool),
        item_seen=np.full(n, seen, dtype=bool),
        fallback=fallback, rating_min=1.0, rating_max=5.0, seed=0)


def ladder_dataset():
    mat = [[5, 4, 3], [4, 3, 2], [3, 2, 1]]
    users = [u for u in range(3) for _ in range(3)]
    items = [i for _ in range(3) for i in range(3)]
    ratings = [float(mat[u][i]) for u, i in zip(users, items)]
    return RatingDataset.from_arrays(users, items, ratings)


def constant_dataset(value=3.0, m=3, n=3):
    users = [u for u in range(m) for _ in range(n)]
    items = [i for _ in range(m) for i in range(n)]
    return RatingDataset.from_arrays(users, items, [value] * (m * n))


class TestTrainConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(k=0), dict(epochs=0), dict(lam=-0.1), dict(eta=0.0),
        dict(eta=30.0, lam=0.5), dict(norm="relu"), dict(delta=0.0),
        dict(init_sigma=-1.0),
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)

    def test_default_sigma_scales_with_k(self):
        assert TrainConfig(k=25).sigma == pytest.approx(0.1 / 5)

    def test_sigma_override(self):
        assert TrainConfig(k=25, init_sigma=0.37).sigma == 0.37


class TestPredict:
    def test_clips_low(self):
        model = make_model(p=0.1, q=0.2, bu=0.5, bi=0.3)
        # raw score 0.82 clips up to the scale floor
        assert model.predict(0, 0) == 1.0

    def test_zero_model_clips_to_floor(self):
        assert make_model().predict(0, 0) == 1.0

    def test_in_scale_score_untouched(self):
        model = make_model(p=1.0, q=2.0, bu=0.5, bi=0.5)
        assert model.predict(0, 0) == 3.0

    def test_clips_high(self):
        model = make_model(p=3.0, q=3.0)
        assert model.predict(0, 0) == 5.0

    def test_unseen_user_falls_back(self):
        model = make_model(m=2, p=2.0, q=2.0)
        model.user_seen[1] = False
        value, is_fb = model.predict_with_flag(1, 0)
        assert value == 3.0 and is_fb

    def test_out_of_range_falls_back(self):
        model = make_model()
        value, is_fb = model.predict_with_flag(7, 0)
        assert value == 3.0 and is_fb
        value, is_fb = model.predict_with_flag(0, -1)
        assert value == 3.0 and is_fb

    def test_fallback_is_clipped(self):
        model = make_model(fallback=9.0)
        model.user_seen[0] = False
        assert model.predict(0, 0) == 5.0

    def test_bounds_on_random_models(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            model = make_model(m=4, n=5, k=3,
                               p=rng.normal(scale=3), q=rng.normal(scale=3),
                               bu=rng.normal(), bi=rng.normal())
            values, _ = model.predict_batch(rng.integers(-1, 6, 30),
                                            rng.integers(-1, 7, 30))
            assert (values >= 1.0).all() and (values <= 5.0).all()


class TestObjective:
    def test_zero_model_single_weighted_rating(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0])
        model = make_model()
        rw = ReliabilityWeights(np.array([1.5]), np.ones(1), np.ones(1),
                                np.array([4.0]), np.array([4.0]), "tanh", 1e-6)
        assert objective(model, ds, lam=0.0, weights=rw) == 24.0

    def test_perfect_model_zero_lambda(self):
        ds = RatingDataset.from_arrays([0], [0], [3.0])
        model = make_model(kind="biased_mf", bu=1.5, bi=1.5)
        assert objective(model, ds, lam=0.0) == 0.0

    def test_zero_model_regularizer_vanishes(self):
        ds = RatingDataset.from_arrays([0, 0], [0, 1], [4.0, 2.0],
                                       num_users=1, num_items=2)
        model = make_model(kind="biased_mf", n=2)
        assert objective(model, ds, lam=0.7) == 16.0 + 4.0

    def test_mfrc_requires_weights(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0])
        with pytest.raises(ValueError):
            objective(make_model(kind="mfrc"), ds, lam=0.1)

    def test_plain_rejects_weights(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0])
        rw = ReliabilityWeights.unit(ds)
        with pytest.raises(ValueError):
            objective(make_model(kind="plain_mf"), ds, lam=0.1, weights=rw)

    def test_dimension_mismatch(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0], num_users=3)
        with pytest.raises(ValueError):
            objective(make_model(kind="biased_mf", m=1), ds, lam=0.1)


class TestSgdStep:
    def test_hand_worked_update(self):
        model = make_model(p=0.1, q=0.2)
        sgd_step_mfrc(model, 0, 0, 4.0, w=1.5, wbar_u=1.5, wbar_i=1.5,
                      lam=0.05, eta=0.005)
        assert model.user_bias[0] == pytest.approx(0.02985, rel=1e-12)
        assert model.item_bias[0] == pytest.approx(0.02985, rel=1e-12)
        assert model.user_factors[0, 0] == pytest.approx(0.1059325, rel=1e-12)
        assert model.item_factors[0, 0] == pytest.approx(0.2029100, rel=1e-12)

    def test_zero_error_zero_lambda_is_fixed_point(self):
        model = make_model(kind="biased_mf", p=1.0, q=2.0, bu=1.0, bi=1.0)
        sgd_step_mfrc(model, 0, 0, 4.0, w=1.3, wbar_u=1.2, wbar_i=1.1,
                      lam=0.0, eta=0.01)
        assert model.user_factors[0, 0] == 1.0
        assert model.item_factors[0, 0] == 2.0
        assert model.user_bias[0] == 1.0

    def test_unit_weights_reduce_to_biased_step(self):
        a = make_model(kind="mfrc", p=0.3, q=-0.2, bu=0.1, bi=-0.1)
        b = make_model(kind="biased_mf", p=0.3, q=-0.2, bu=0.1, bi=-0.1)
        for model in (a, b):
            sgd_step_mfrc(model, 0, 0, 4.0, w=1.0, wbar_u=1.0, wbar_i=1.0,
                          lam=0.05, eta=0.005)
        assert a.user_factors[0, 0] == b.user_factors[0, 0]
        assert a.item_factors[0, 0] == b.item_factors[0, 0]
        assert a.user_bias[0] == b.user_bias[0]

    def test_out_of_range_ids_rejected(self):
        model = make_model(m=2, n=3)
        with pytest.raises(IndexError):
            sgd_step_mfrc(model, 2, 0, 4.0, 1.0, 1.0, 1.0, 0.05, 0.005)
        with pytest.raises(IndexError):
            sgd_step_mfrc(model, 0, -1, 4.0, 1.0, 1.0, 1.0, 0.05, 0.005)

    def test_factor_updates_use_snapshot(self):
        # q update must see the pre-update p
        model = make_model(p=0.5, q=0.25)
        sgd_step_mfrc(model, 0, 0, 4.0, w=1.0, wbar_u=1.0, wbar_i=1.0,
                      lam=0.0, eta=0.1)
        e = 4.0 - 0.125
        assert model.user_factors[0, 0] == pytest.approx(0.5 + 0.1 * e * 0.25, rel=1e-14)
        assert model.item_factors[0, 0] == pytest.approx(0.25 + 0.1 * e * 0.5, rel=1e-14)


def _models_equal(a, b):
    return (np.array_equal(a.user_factors, b.user_factors)
            and np.array_equal(a.item_factors, b.item_factors)
            and np.array_equal(a.user_bias, b.user_bias)
            and np.array_equal(a.item_bias, b.item_bias)
            and np.array_equal(a.user_seen, b.user_seen)
            and np.array_equal(a.item_seen, b.item_seen)
            and a.fallback == b.fallback and a.k == b.k
            and (a.rating_min, a.rating_max) == (b.rating_min, b.rating_max))


class TestSgdTrainers:
    def test_same_config_bit_identical(self, toy):
        cfg = TrainConfig(k=4, epochs=15, seed=21)
        rw = build_weights(toy, "tanh")
        a, _ = train_mfrc(toy, rw, cfg)
        b, _ = train_mfrc(toy, rw, cfg)
        assert _models_equal(a, b)

    def test_unit_weights_reproduce_biased_mf(self, toy):
        cfg = TrainConfig(k=4, epochs=15, seed=21)
        unit = ReliabilityWeights.unit(toy)
        a, trace_a = train_mfrc(toy, unit, cfg)
        b, trace_b = train_biased_mf(toy, cfg)
        assert _models_equal(a, b)
        assert trace_a.objective == trace_b.objective
        assert trace_a.train_rmse == trace_b.train_rmse

    def test_trace_lengths_match_epochs(self, toy):
        cfg = TrainConfig(k=3, epochs=12, seed=0)
        _, trace = train_biased_mf(toy, cfg)
        assert len(trace.objective) == 12
        assert len(trace.train_rmse) == 12

    def test_parameters_finite_after_training(self, toy):
        cfg = TrainConfig(k=3, epochs=10, seed=2)
        rw = build_weights(toy, "sigmoid")
        for model, _ in (train_mfrc(toy, rw, cfg), train_biased_mf(toy, cfg),
                         train_plain_mf(toy, cfg), train_alswr(toy, TrainConfig(k=3, epochs=5, seed=2))):
            assert np.isfinite(model.user_factors).all()
            assert np.isfinite(model.item_factors).all()
            assert np.isfinite(model.user_bias).all()
            assert np.isfinite(model.item_bias).all()

    def test_plain_mf_biases_stay_zero(self, toy):
        model, _ = train_plain_mf(toy, TrainConfig(k=3, epochs=10, seed=1))
        assert (model.user_bias == 0.0).all()
        assert (model.item_bias == 0.0).all()
        assert model.kind == "plain_mf"

    def test_plain_mf_single_rating_matches_scalar_recurrence(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0])
        cfg = TrainConfig(k=1, epochs=500, lam=0.0, eta=0.01, seed=123)
        model, _ = train_plain_mf(ds, cfg)
        # independent recurrence from the same seeded init
        rng = np.random.default_rng(123)
        p = rng.normal(0.0, 0.1, (1, 1))[0, 0]
        q = rng.normal(0.0, 0.1, (1, 1))[0, 0]
        for _ in range(500):
            e = 4.0 - p * q
            p, q = p + 0.01 * e * q, q + 0.01 * e * p
        assert model.user_factors[0, 0] == pytest.approx(p, rel=1e-12)
        assert model.item_factors[0, 0] == pytest.approx(q, rel=1e-12)
        assert model.user_factors[0, 0] * model.item_factors[0, 0] == pytest.approx(4.0, abs=0.01)

    def test_biased_mf_absorbs_constant_ratings(self):
        ds = constant_dataset(3.0)
        cfg = TrainConfig(k=2, epochs=100, lam=0.001, eta=0.05, seed=7)
        _, trace = train_biased_mf(ds, cfg)
        assert trace.train_rmse[-1] < 0.05

    def test_mfrc_fits_learnable_toy(self):
        ds = ladder_dataset()
        rw = build_weights(ds, "tanh")
        cfg = TrainConfig(k=2, epochs=200, lam=0.05, eta=0.01, seed=11)
        _, trace = train_mfrc(ds, rw, cfg)
        assert trace.train_rmse[-1] < 0.1 * trace.train_rmse[0]

    def test_divergence_names_epoch(self):
        ds = constant_dataset(3.0)
        cfg = TrainConfig(k=2, epochs=50, lam=0.0, eta=30.0, seed=0)
        with pytest.raises(DivergenceError) as err:
            train_biased_mf(ds, cfg)
        assert "epoch" in str(err.value)
        assert err.value.epoch >= 0

    def test_misaligned_weights_rejected(self, toy):
        rw = build_weights(toy, "tanh")
        smaller = toy.take(np.arange(len(toy) - 5))
        with pytest.raises(ValueError):
            train_mfrc(smaller, rw, TrainConfig(k=2, epochs=1))

    def test_empty_train_rejected(self):
        empty = RatingDataset.from_arrays([], [], [], num_users=1, num_items=1)
        with pytest.raises(ValueError):
            train_biased_mf(empty, TrainConfig(k=1, epochs=1))


class TestGradientDirection:
    """Printed update direction vs central finite differences of the
    per-rating loss term (one global factor of 2 apart)."""

    @staticmethod
    def _per_rating_loss(params, r, w, wbu, wbi, lam):
        p, q, bu, bi = params
        e = r - (bu + bi + float(np.dot(p, q)))
        return (e * e * w
                + lam * (wbu * (float(np.dot(p, p)) + bu * bu)
                         + wbi * (float(np.dot(q, q)) + bi * bi)))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        h = 1e-6
        for _ in range(20):
            k = int(rng.integers(1, 4))
            p = rng.normal(0, 1, k)
            q = rng.normal(0, 1, k)
            bu = float(rng.normal())
            bi = float(rng.normal())
            r = float(rng.uniform(1, 5))
            w = float(rng.uniform(1, 2))
            wbu = float(rng.uniform(1, 2))
            wbi = float(rng.uniform(1, 2))
            lam = float(rng.uniform(0, 0.5))
            e = r - (bu + bi + float(np.dot(p, q)))

            # analytic printed directions
            direction = {
                "bu": lam * wbu * bu - e * w,
                "bi": lam * wbi * bi - e * w,
            }
            for f in range(k):
                direction[f"p{f}"] = lam * wbu * p[f] - e * w * q[f]
                direction[f"q{f}"] = lam * wbi * q[f] - e * w * p[f]

            def loss(pv, qv, buv, biv):
                return self._per_rating_loss((pv, qv, buv, biv), r, w, wbu, wbi, lam)

            numeric = {
                "bu": (loss(p, q, bu + h, bi) - loss(p, q, bu - h, bi)) / (2 * h),
                "bi": (loss(p, q, bu, bi + h) - loss(p, q, bu, bi - h)) / (2 * h),
            }
            for f in range(k):
                dp = np.zeros(k); dp[f] = h
                numeric[f"p{f}"] = (loss(p + dp, q, bu, bi) - loss(p - dp, q, bu, bi)) / (2 * h)
                numeric[f"q{f}"] = (loss(p, q + dp, bu, bi) - loss(p, q - dp, bu, bi)) / (2 * h)

            for name, analytic in direction.items():
                expected = 2.0 * analytic
                scale = max(1.0, abs(numeric[name]))
                assert abs(numeric[name] - expected) <= 1e-5 * scale, (
                    f"{name}: numeric {numeric[name]} vs 2x printed {expected}")


class TestAlswr:
    def test_objective_monotone_over_sweeps(self):
        for seed in range(10):
            ds = synthetic_dataset(num_users=8, num_items=9, n_ratings=40,
                                   seed=seed, structured=False)
            _, trace = train_alswr(ds, TrainConfig(k=3, epochs=20, lam=0.05, seed=seed))
            obj = np.array(trace.objective)
            assert (obj[1:] <= obj[:-1] * (1 + 1e-9)).all()

    def test_single_cell_exact_fit(self):
        ds = RatingDataset.from_arrays([0], [0], [4.0])
        model, _ = train_alswr(ds, TrainConfig(k=1, epochs=50, lam=0.0, seed=5))
        assert model.user_factors[0, 0] * model.item_factors[0, 0] == pytest.approx(4.0, abs=1e-6)

    def test_regularized_solves_never_singular(self):
        # entities with fewer ratings than factors: fine for lam > 0
        ds = RatingDataset.from_arrays([0, 1, 2], [0, 1, 2], [4.0, 3.0, 2.0])
        model, _ = train_alswr(ds, TrainConfig(k=5, epochs=3, lam=0.05, seed=0))
        assert np.isfinite(model.user_factors).all()

    def test_rank_deficient_without_lambda_raises(self):
        ds = RatingDataset.from_arrays([0, 1, 2], [0, 1, 2], [4.0, 3.0, 2.0])
        with pytest.raises(SingularMatrixError):
            train_alswr(ds, TrainConfig(k=5, epochs=3, lam=0.0, seed=0))

    def test_biases_stay_zero(self, toy):
        model, _ = train_alswr(toy, TrainConfig(k=3, epochs=4, seed=3))
        assert (model.user_bias == 0.0).all()
        assert (model.item_bias == 0.0).all()

    def test_deterministic(self, toy):
        cfg = TrainConfig(k=3, epochs=5, seed=9)
        a, _ = train_alswr(toy, cfg)
        b, _ = train_alswr(toy, cfg)
        assert _models_equal(a, b)

    def test_traced_objective_equals_count_scaled_form(self, toy):
        # summing an entity's penalty once per training pair is the same
        # as scaling it by the entity's rating count
        cfg = TrainConfig(k=3, epochs=4, lam=0.07, seed=6)
        model, trace = train_alswr(toy, cfg)
        raw_scores = np.array([
            float(np.dot(model.user_factors[u], model.item_factors[i]))
            for u, i, _ in toy])
        sq_err = float(np.sum((toy.ratings - raw_scores) ** 2))
        n_u = toy.user_counts()
        n_i = toy.item_counts()
        reg = (np.sum(n_u * np.sum(model.user_factors ** 2, axis=1))
               + np.sum(n_i * np.sum(model.item_factors ** 2, axis=1)))
        assert trace.objective[-1] == pytest.approx(sq_err + cfg.lam * reg, rel=1e-10)
        assert objective(model, toy, cfg.lam) == pytest.approx(
            sq_err + cfg.lam * reg, rel=1e-10)


class TestSnapshot:
    def test_round_trip_field_by_field(self, toy, tmp_path):
        rw = build_weights(toy, "tanh")
        model, _ = train_mfrc(toy, rw, TrainConfig(k=3, epochs=5, seed=13))
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert _models_equal(model, back)
        assert back.kind == model.kind and back.seed == model.seed
        assert back.num_users == model.num_users and back.num_items == model.num_items

    def test_truncated_file(self, toy, tmp_path):
        model, _ = train_plain_mf(toy, TrainConfig(k=2, epochs=2, seed=0))
        path = tmp_path / "model.json"
        save_model(model, path)
        blob = path.read_text()
        path.write_text(blob[: len(blob) // 2])
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_wrong_version(self, toy, tmp_path):
        import json
        model, _ = train_plain_mf(toy, TrainConfig(k=2, epochs=2, seed=0))
        path = tmp_path / "model.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = "mfrc-model/99"
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelVersionError):
            load_model(path)

    def test_dimension_corruption(self, toy, tmp_path):
        import json
        model, _ = train_plain_mf(toy, TrainConfig(k=2, epochs=2, seed=0))
        path = tmp_path / "model.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        doc["P"] = doc["P"][:-3]
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_model(tmp_path / "absent.json")
