import numpy as np
import pytest

from chaincast.errors import DivergenceError
from chaincast.neuralnet import (
    MlpModel,
    Scaler,
    TrainConfig,
    evaluate,
    fit_scaler,
    forward,
    gradient_check,
    model_from_json,
    model_to_json,
    predict_prices,
    sweep,
    train,
)
from chaincast.regression import FeatureMatrix

from conftest import weekdays


def matrix(cols, y):
    names = tuple(cols)
    n = len(y)
    days = weekdays(n + 1)
    return FeatureMatrix(
        dates=tuple(days[:n]),
        target_dates=tuple(days[1:]),
        columns=names,
        x=np.column_stack([np.asarray(cols[c], float) for c in names]),
        y=np.asarray(y, float),
    )


def linear_matrix(n=120, seed=0, noise=0.0):
    """Positive target that is an affine function of two inputs."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 10, n)
    b = rng.uniform(0, 5, n)
    y = 100.0 + 3.0 * a + 2.0 * b + rng.normal(0, noise, n)
    return matrix({"x1": a, "x2": b}, y)


def kinked_matrix(n=200, seed=1):
    """Target with an absolute-value fold a single unit cannot represent."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, n)
    y = 50.0 + 10.0 * np.abs(a) + rng.normal(0, 0.05, n)
    return matrix({"x1": a}, y)


# --- scaling --------------------------------------------------------------


def test_scaler_maps_to_unit_interval():
    m = matrix({"x1": [10.0, 20.0, 30.0]}, [10.0, 20.0, 30.0])
    scaler = fit_scaler(m)
    np.testing.assert_allclose(scaler.apply_x(m.x)[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(scaler.apply_y(m.y), [0.0, 0.5, 1.0])


def test_scaler_round_trip_identity():
    rng = np.random.default_rng(2)
    m = matrix({"x1": rng.uniform(5, 9, 40)}, rng.uniform(100, 200, 40))
    scaler = fit_scaler(m)
    back = scaler.invert_y(scaler.apply_y(m.y))
    np.testing.assert_allclose(back, m.y, atol=1e-12)


def test_scaler_constant_column_named():
    m = matrix({"x1": np.full(20, 4.0), "x2": np.arange(20.0)},
               np.arange(1.0, 21.0))
    with pytest.raises(ValueError, match="x1"):
        fit_scaler(m)


def test_scaler_constant_target_rejected():
    m = matrix({"x1": np.arange(20.0)}, np.full(20, 9.0))
    with pytest.raises(ValueError, match="target"):
        fit_scaler(m)


# --- forward pass ---------------------------------------------------------


def unit_model(w=1.0, b_h=0.0, w_o=1.0, b_o=0.0):
    scaler = Scaler(("x1",), np.array([0.0]), np.array([1.0]), 0.0, 1.0)
    return MlpModel(
        columns=("x1",),
        w_hidden=np.array([[w]]),
        b_hidden=np.array([b_h]),
        w_out=np.array([w_o]),
        b_out=b_o,
        scaler=scaler,
    )


def test_forward_zero_weights_outputs_bias():
    model = unit_model(w=0.0, w_o=0.0, b_o=0.25)
    assert forward(model, np.array([3.0])) == 0.25


def test_forward_single_unit_rectifies():
    model = unit_model()
    assert forward(model, np.array([-1.0])) == 0.0
    assert forward(model, np.array([2.0])) == 2.0


def test_forward_shape_mismatch():
    model = unit_model()
    with pytest.raises(ValueError):
        forward(model, np.array([1.0, 2.0]))


def test_predict_prices_rejects_permuted_schema():
    m = linear_matrix()
    model, _ = train(m, hidden=2, config=TrainConfig(epochs=5))
    swapped = m.with_columns(("x2", "x1"))
    with pytest.raises(ValueError, match="schema"):
        predict_prices(model, swapped)


# --- training -------------------------------------------------------------


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=0.5)


def test_train_input_validation():
    m = linear_matrix()
    with pytest.raises(ValueError):
        train(m, hidden=0)
    small = matrix({"x1": np.arange(20.0)}, np.arange(1.0, 21.0))
    with pytest.raises(ValueError, match="30"):
        train(small, hidden=2)


def test_train_is_bitwise_deterministic():
    m = linear_matrix()
    config = TrainConfig(epochs=40, seed=5)
    model_a, report_a = train(m, hidden=3, config=config)
    model_b, report_b = train(m, hidden=3, config=config)
    np.testing.assert_array_equal(model_a.w_hidden, model_b.w_hidden)
    np.testing.assert_array_equal(model_a.w_out, model_b.w_out)
    np.testing.assert_array_equal(report_a.epoch_mse, report_b.epoch_mse)
    assert report_a.train_mape == report_b.train_mape


def test_train_learns_linear_target():
    m = linear_matrix(noise=0.0)
    _, report = train(m, hidden=4,
                      config=TrainConfig(epochs=400, learning_rate=0.1))
    assert report.train_mape < 1.0
    assert report.validation_mape < 2.0


def test_train_loss_decreases_over_run():
    m = linear_matrix(noise=0.1)
    _, report = train(m, hidden=4,
                      config=TrainConfig(epochs=200, learning_rate=0.05))
    mse = report.epoch_mse
    assert np.mean(mse[-10:]) < np.mean(mse[:10])


def test_train_divergence_reports_epoch():
    m = linear_matrix()
    with pytest.raises(DivergenceError) as exc:
        train(m, hidden=4, config=TrainConfig(learning_rate=1e3))
    assert exc.value.epoch >= 0
    assert "epoch" in str(exc.value)


def test_train_report_bookkeeping():
    m = linear_matrix()
    config = TrainConfig(epochs=30, seed=9)
    _, report = train(m, hidden=2, config=config)
    assert report.hidden_size == 2
    assert report.seed == 9
    assert report.epochs_run == len(report.epoch_mse) == 30
    assert not report.early_stopped


def test_train_zero_validation_fraction_gives_nan():
    m = linear_matrix()
    _, report = train(m, hidden=2,
                      config=TrainConfig(epochs=10, validation_fraction=0.0))
    assert np.isnan(report.validation_mape)


# --- sweep ----------------------------------------------------------------


def test_sweep_covers_every_size_and_picks_best():
    m = linear_matrix()
    config = TrainConfig(epochs=60, learning_rate=0.05, seed=3)
    result = sweep(m, config, max_hidden=4)
    assert set(result.reports) | set(result.failures) == {1, 2, 3, 4}
    assert result.model.hidden_size == result.chosen
    best = min(result.reports,
               key=lambda h: (result.reports[h].validation_mape, h))
    assert result.chosen == best
    # each size trains under its own derived seed
    for h, report in result.reports.items():
        assert report.seed == 3 + h


def test_sweep_rejects_zero_validation():
    m = linear_matrix()
    with pytest.raises(ValueError):
        sweep(m, TrainConfig(epochs=5, validation_fraction=0.0), max_hidden=2)


def test_sweep_records_divergent_sizes_as_failures():
    m = linear_matrix()
    config = TrainConfig(epochs=10, learning_rate=200.0, seed=0)
    try:
        result = sweep(m, config, max_hidden=2)
    except Exception as exc:
        assert "diverged" in str(exc)
    else:
        assert set(result.reports) | set(result.failures) == {1, 2}


# --- verification and persistence ------------------------------------------


def test_gradient_check_tiny():
    m = linear_matrix(n=60, seed=7, noise=0.2)
    assert gradient_check(m, hidden=3, seed=0) < 1e-6


def test_evaluate_returns_price_space_mape():
    m = linear_matrix()
    model, _ = train(m, hidden=3,
                     config=TrainConfig(epochs=100, learning_rate=0.1))
    test = linear_matrix(seed=42)
    err, preds = evaluate(model, test)
    from chaincast.metrics import mape
    assert err == mape(test.y, preds)
    assert preds.shape == test.y.shape


def test_model_json_round_trip_bit_exact():
    m = linear_matrix()
    model, _ = train(m, hidden=3, config=TrainConfig(epochs=20))
    clone = model_from_json(model_to_json(model))
    assert clone.columns == model.columns
    np.testing.assert_array_equal(clone.w_hidden, model.w_hidden)
    np.testing.assert_array_equal(clone.w_out, model.w_out)
    np.testing.assert_array_equal(
        predict_prices(clone, m), predict_prices(model, m))


def test_model_json_is_valid_json_with_schema():
    import json
    m = linear_matrix()
    model, _ = train(m, hidden=2, config=TrainConfig(epochs=5))
    payload = json.loads(model_to_json(model))
    assert set(payload) == {"columns", "w_hidden", "b_hidden",
                            "w_out", "b_out", "scaler"}
