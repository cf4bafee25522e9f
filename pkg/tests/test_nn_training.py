import numpy as np
import pytest

from cuneo.errors import TrainingError
from cuneo.nn import model as nm
from cuneo.nn import training as nt


def _toy_config(seed=0):
    return nm.ModelConfig(
        input_shape=(1, 6, 6),
        layers=(nm.FlattenSpec(), nm.DenseSpec(units=2), nm.SoftmaxSpec()),
        num_classes=2,
        seed=seed,
    )


def _toy_data(n=24):
    x = np.zeros((n, 6, 6), dtype=bool)
    x[n // 2:] = True
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    return x, y


# ---------------------------------------------------------------------------
# Adam

def test_adam_step_matches_scalar_recurrence():
    # single scalar parameter, hand-rolled reference recurrence
    params = [{"w": np.array([0.5], dtype=np.float64)}]
    state = nt.AdamState(params)
    tc = nt.TrainConfig(learning_rate=0.1, beta1=0.9, beta2=0.999, epsilon=1e-8)

    w, m, v = 0.5, 0.0, 0.0
    for t in range(1, 6):
        g = 2.0 * w  # gradient of w^2
        grads = [{"w": np.array([g])}]
        nt.adam_step(params, grads, state, tc)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mhat = m / (1 - 0.9 ** t)
        vhat = v / (1 - 0.999 ** t)
        w -= 0.1 * mhat / (np.sqrt(vhat) + 1e-8)
        assert np.isclose(params[0]["w"][0], w, rtol=1e-12), t
    assert state.t == 5


def test_adam_updates_in_place_and_decreases_quadratic():
    params = [{"w": np.array([3.0, -2.0])}]
    ref = params[0]["w"]
    state = nt.AdamState(params)
    tc = nt.TrainConfig(learning_rate=0.05)
    for _ in range(200):
        grads = [{"w": 2.0 * params[0]["w"]}]
        nt.adam_step(params, grads, state, tc)
    assert params[0]["w"] is ref  # no reallocation
    assert np.abs(params[0]["w"]).max() < 0.05


# ---------------------------------------------------------------------------
# train loop

def test_train_learns_separable_problem():
    cfg = _toy_config()
    x, y = _toy_data()
    params, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                           nt.TrainConfig(max_epochs=20, patience=20, batch_size=8))
    assert log.epochs[-1].val_accuracy == 1.0
    assert np.array_equal(nm.predict(cfg, params, x), y)
    assert all(e.epoch == i + 1 for i, e in enumerate(log.epochs))
    assert log.wall_time_s >= 0.0


def test_train_is_deterministic():
    cfg = _toy_config(seed=11)
    x, y = _toy_data()
    tc = nt.TrainConfig(max_epochs=6, patience=6, batch_size=5, shuffle_seed=2)
    p1, log1 = nt.train(cfg, nm.init_params(cfg), x, y, x, y, tc)
    p2, log2 = nt.train(cfg, nm.init_params(cfg), x, y, x, y, tc)
    assert log1.deterministic_fields() == log2.deterministic_fields()
    for a, b in zip(p1, p2):
        for k in a:
            assert np.array_equal(a[k], b[k])
    # a different shuffle stream changes the path
    p3, log3 = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                        nt.TrainConfig(max_epochs=6, patience=6, batch_size=5, shuffle_seed=3))
    assert log1.deterministic_fields() != log3.deterministic_fields()


def test_early_stopping_on_injected_plateau():
    cfg = _toy_config()
    x, y = _toy_data()
    override = [1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]
    params, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                           nt.TrainConfig(max_epochs=10, patience=5),
                           val_loss_override=override)
    assert log.stopped_early
    assert len(log.epochs) == 7  # epochs 3..7 are the five bad ones
    assert log.best_epoch == 2
    # returned parameters are the epoch-2 snapshot: replay two epochs exactly
    p2, log2 = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                        nt.TrainConfig(max_epochs=2, patience=5),
                        val_loss_override=override)
    assert not log2.stopped_early
    for a, b in zip(params, p2):
        for k in a:
            assert np.array_equal(a[k], b[k])


def test_early_stopping_tie_is_not_improvement():
    cfg = _toy_config()
    x, y = _toy_data()
    override = [0.5, 0.5, 0.5, 0.4, 0.4, 0.4, 0.4, 0.4]
    _, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                      nt.TrainConfig(max_epochs=8, patience=3),
                      val_loss_override=override)
    # epoch 4 improves; 5,6,7 tie -> stop after epoch 7
    assert log.stopped_early and len(log.epochs) == 7 and log.best_epoch == 4


def test_train_runs_to_max_epochs_without_plateau():
    cfg = _toy_config()
    x, y = _toy_data()
    override = [1.0 / (i + 1) for i in range(5)]
    _, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                      nt.TrainConfig(max_epochs=5, patience=2),
                      val_loss_override=override)
    assert not log.stopped_early
    assert len(log.epochs) == 5 and log.best_epoch == 5


def test_override_must_not_run_out():
    cfg = _toy_config()
    x, y = _toy_data()
    # [1.0, 0.9] improves at epoch 2, so patience never fires and epoch 3
    # has no injected value left
    with pytest.raises(ValueError, match="ran out"):
        nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                 nt.TrainConfig(max_epochs=5, patience=2), val_loss_override=[1.0, 0.9])
    with pytest.raises(ValueError, match="empty"):
        nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                 nt.TrainConfig(max_epochs=5, patience=2), val_loss_override=[])
    # a sequence that stops the run early may be shorter than max_epochs:
    # epoch 1 sets the best, epochs 2-3 are the two bad epochs
    _, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                      nt.TrainConfig(max_epochs=50, patience=2),
                      val_loss_override=[1.0, 1.0, 1.0])
    assert log.stopped_early and len(log.epochs) == 3 and log.best_epoch == 1


def test_train_rejects_nonfinite_loss():
    cfg = _toy_config()
    x, y = _toy_data()
    params = nm.init_params(cfg)
    params[1]["w"][:] = np.nan
    with pytest.raises(TrainingError, match="finite"):
        nt.train(cfg, params, x, y, x, y, nt.TrainConfig(max_epochs=2, patience=2))


def test_train_config_validation():
    for bad in (dict(max_epochs=0), dict(patience=0), dict(batch_size=0),
                dict(learning_rate=0.0), dict(beta1=1.0), dict(beta2=-0.1),
                dict(epsilon=0.0), dict(min_delta=-1.0)):
        with pytest.raises(Exception):
            nt.TrainConfig(**bad)


def test_epoch_stats_are_recorded():
    cfg = _toy_config()
    x, y = _toy_data()
    _, log = nt.train(cfg, nm.init_params(cfg), x, y, x, y,
                      nt.TrainConfig(max_epochs=3, patience=3))
    for e in log.epochs:
        assert np.isfinite(e.train_loss) and np.isfinite(e.val_loss)
        assert 0.0 <= e.val_accuracy <= 1.0


# ---------------------------------------------------------------------------
# gradient checking

def test_gradient_check_passes_every_kind():
    report = nt.gradient_check(seed=0, instances_per_kind=3)
    assert report.passed
    assert report.max_rel_err <= 1e-4
    kinds = [e.kind for e in report.entries]
    assert kinds == list(nt.GRADCHECK_KINDS)
    for e in report.entries:
        assert e.instances == 3
        assert e.max_rel_err <= report.threshold


@pytest.mark.parametrize("kind", nt.GRADCHECK_KINDS)
def test_gradient_check_detects_injected_fault(kind):
    report = nt.gradient_check(seed=0, instances_per_kind=2, fault=kind)
    assert not report.passed
    bad = [e for e in report.entries if e.max_rel_err > report.threshold]
    assert bad and all(e.kind == kind for e in bad)


def test_gradient_check_rejects_unknown_fault():
    with pytest.raises(ValueError):
        nt.gradient_check(fault="batchnorm")
