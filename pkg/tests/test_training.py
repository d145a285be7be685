import math

import numpy as np
import pytest

from exemplar_dialog import autodiff as ad
from exemplar_dialog import model as M
from exemplar_dialog import training as T
from exemplar_dialog.errors import DataError, NumericalError
from exemplar_dialog.text import EOS_ID


def toy_data(n=12, seed=0, exemplar=False):
    rng = np.random.default_rng(seed)

    def seq():
        return [int(x) for x in rng.integers(4, 15, size=int(rng.integers(1, 4)))] + [EOS_ID]
    return M.Batch([seq() for _ in range(n)], [seq() for _ in range(n)], [seq() for _ in range(n)],
                   [seq() for _ in range(n)] if exemplar else None)


def small_cfg(**kw):
    return M.ModelConfig(15, 4, 6, **{"dropout": 0.0, **kw})


def test_adam_zero_gradient_leaves_params():
    p = ad.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    state = T.AdamState.zeros([p])
    T.adam_step([p], state, T.TrainConfig(), [np.zeros(2)])
    assert np.array_equal(p.value, [1.0, -2.0])
    assert state.t == 1


def test_adam_first_steps_move_by_lr():
    # bias correction makes early steps with a constant gradient ~ lr * sign(g)
    p = ad.Tensor(np.array([0.0, 0.0, 0.0]), requires_grad=True)
    cfg = T.TrainConfig(learning_rate=0.01)
    state = T.AdamState.zeros([p])
    g = np.array([3.0, -0.5, 1e-3])
    for step in range(1, 4):
        T.adam_step([p], state, cfg, [g])
        assert p.value == pytest.approx(-step * 0.01 * np.sign(g), rel=1e-4)


def test_adam_minimises_quadratic():
    target = np.array([1.5, -0.7, 3.0])
    p = ad.Tensor(np.zeros(3), requires_grad=True)
    cfg = T.TrainConfig(learning_rate=0.05)
    state = T.AdamState.zeros([p])
    for _ in range(500):
        T.adam_step([p], state, cfg, [2 * (p.value - target)])
    assert np.abs(p.value - target).max() < 1e-2


def test_adam_rejects_bad_gradients():
    p = ad.Tensor(np.zeros(2), requires_grad=True)
    state = T.AdamState.zeros([p])
    with pytest.raises(NumericalError):
        T.adam_step([p], state, T.TrainConfig(), [np.array([np.nan, 0.0])])
    with pytest.raises(ValueError):
        T.adam_step([p], state, T.TrainConfig(), [np.zeros(3)])


def test_clip_grad_norm():
    a = ad.Tensor(np.zeros(2), requires_grad=True)
    b = ad.Tensor(np.zeros(1), requires_grad=True)
    a.grad[:] = [3.0, 4.0]
    b.grad[:] = [12.0]
    assert T.clip_grad_norm([a, b], 5.0) == pytest.approx(13.0)
    assert math.sqrt(np.sum(a.grad ** 2) + np.sum(b.grad ** 2)) == pytest.approx(5.0)
    assert a.grad == pytest.approx([3 * 5 / 13, 4 * 5 / 13])
    a.grad[:] = [0.3, 0.4]
    b.grad[:] = 0.0
    assert T.clip_grad_norm([a, b], 5.0) == pytest.approx(0.5)
    assert a.grad == pytest.approx([0.3, 0.4])


def test_train_config_validation():
    with pytest.raises(ValueError):
        T.TrainConfig(patience=50, max_epochs=50)
    with pytest.raises(ValueError):
        T.TrainConfig(learning_rate=0.0)


def test_loss_decreases():
    cfg = small_cfg()
    data = toy_data()
    params = M.init_params(cfg)
    h, _, _ = T.train(params, cfg, data, data, T.TrainConfig(learning_rate=0.01, max_epochs=15, patience=5,
                                                             batch_size=4))
    assert h.train_losses[-1] < h.train_losses[0]
    assert h.best_dev_loss < h.dev_losses[0]


def test_early_stopping_patience_one(monkeypatch):
    losses = iter([2.0, 3.0, 1.0, 0.5])
    monkeypatch.setattr(T, "evaluate_loss", lambda *a, **k: next(losses))
    cfg = small_cfg()
    h, _, _ = T.train(M.init_params(cfg), cfg, toy_data(4), toy_data(4), T.TrainConfig(max_epochs=10, patience=1))
    assert len(h.epochs) == 2
    assert h.best_epoch == 1
    assert "early stopping" in h.stop_reason


def test_best_parameters_are_returned(monkeypatch):
    losses = iter([2.0, 1.0, 1.5, 1.6])
    snapshots = []
    cfg = small_cfg()
    params = M.init_params(cfg)
    monkeypatch.setattr(T, "evaluate_loss", lambda *a, **k: next(losses))
    _, best, _ = T.train(params, cfg, toy_data(4), toy_data(4), T.TrainConfig(max_epochs=4, patience=2),
                         on_epoch=lambda r: snapshots.append(params.copy()))
    for b, s in zip(best, snapshots[1]):
        assert np.array_equal(b.value, s.value)


def test_stop_when():
    cfg = small_cfg()
    h, _, _ = T.train(M.init_params(cfg), cfg, toy_data(4), toy_data(4), T.TrainConfig(max_epochs=10, patience=5),
                      stop_when=lambda r: r["epoch"] == 3)
    assert len(h.epochs) == 3
    assert h.stop_reason == "stop condition met"


def test_training_is_deterministic():
    cfg = small_cfg(dropout=0.2)
    tc = T.TrainConfig(max_epochs=3, patience=2, batch_size=4)
    runs = []
    for _ in range(2):
        h, best, _ = T.train(M.init_params(cfg), cfg, toy_data(), toy_data(seed=1), tc)
        runs.append((h.train_losses, h.dev_losses, [p.value.copy() for p in best]))
    assert runs[0][0] == runs[1][0] and runs[0][1] == runs[1][1]
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][2], runs[1][2]))


def test_exemplar_arch_needs_exemplars():
    cfg = small_cfg(arch="exemplar")
    with pytest.raises(DataError):
        T.train(M.init_params(cfg), cfg, toy_data(4), toy_data(4), T.TrainConfig(max_epochs=2, patience=1))


def test_checkpoint_round_trip_is_byte_identical(tmp_path):
    cfg = small_cfg(arch="exemplar")
    data = toy_data(6, exemplar=True)
    tc = T.TrainConfig(max_epochs=2, patience=1)
    params = M.init_params(cfg)
    _, best, state = T.train(params, cfg, data, data, tc)
    T.save_checkpoint(tmp_path / "a.ckpt", best, state, cfg, "hash1", tc, {"best_epoch": 1})
    ck = T.load_checkpoint(tmp_path / "a.ckpt", "hash1")
    assert ck.model_config == cfg and ck.train_config == tc and ck.extra == {"best_epoch": 1}
    T.save_checkpoint(tmp_path / "b.ckpt", ck.params, ck.adam_state, ck.model_config, ck.vocab_hash,
                      ck.train_config, ck.extra)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_checkpoint_rejects_other_vocabulary(tmp_path):
    cfg = small_cfg()
    T.save_checkpoint(tmp_path / "m.ckpt", M.init_params(cfg), None, cfg, "abc")
    with pytest.raises(DataError, match="different vocabulary"):
        T.load_checkpoint(tmp_path / "m.ckpt", "xyz")
    assert T.load_checkpoint(tmp_path / "m.ckpt").adam_state is None


def test_resume_continues_the_same_curve(tmp_path):
    cfg = small_cfg(dropout=0.1)
    train_data, dev_data = toy_data(), toy_data(seed=1)
    tc = T.TrainConfig(max_epochs=4, patience=3, batch_size=4)
    full, _, _ = T.train(M.init_params(cfg), cfg, train_data, dev_data, tc)

    params = M.init_params(cfg)
    short = T.TrainConfig(max_epochs=2, patience=1, batch_size=4)
    first, _, state = T.train(params, cfg, train_data, dev_data, short)
    T.save_checkpoint(tmp_path / "mid.ckpt", params, state, cfg, "h", tc)
    ck = T.load_checkpoint(tmp_path / "mid.ckpt")
    rest, _, _ = T.train(ck.params, cfg, train_data, dev_data, tc, ck.adam_state, start_epoch=2)
    assert first.dev_losses + rest.dev_losses == pytest.approx(full.dev_losses, abs=1e-12)
