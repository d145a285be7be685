import numpy as np
import pytest

from exemplar_dialog import autodiff as ad
from exemplar_dialog import model as M
from exemplar_dialog.text import EOS_ID
from gradcheck import max_rel_error, numeric_grad


def micro_batch(rng, V=20, B=3, max_len=5, exemplar=True):
    def seq():
        n = int(rng.integers(1, max_len))
        return [int(x) for x in rng.integers(4, V, size=n)] + [EOS_ID]
    return M.Batch([seq() for _ in range(B)], [seq() for _ in range(B)], [seq() for _ in range(B)],
                   [seq() for _ in range(B)] if exemplar else None)


def model_grad_error(cfg, batch):
    params = M.init_params(cfg)
    loss = M.forward_loss(batch, params, cfg)
    ad.backward(loss)
    analytic = [p.grad.copy() for p in params]
    numeric = numeric_grad(lambda: M.forward_loss(batch, params, cfg).item(), [p.value for p in params])
    return max_rel_error(analytic, numeric)


@pytest.mark.parametrize("arch,share", [("hred", True), ("exemplar", True), ("exemplar", False)])
def test_forward_loss_gradients(arch, share):
    cfg = M.ModelConfig(20, 4, 6, dropout=0.0, arch=arch, share_encoders=share, seed=3)
    batch = micro_batch(np.random.default_rng(7), exemplar=arch == "exemplar")
    assert model_grad_error(cfg, batch) < 1e-5


def test_parameter_shapes_and_sharing():
    shared = dict(M.param_shapes(M.ModelConfig(30, 8, 10, arch="exemplar")))
    separate = dict(M.param_shapes(M.ModelConfig(30, 8, 10, arch="exemplar", share_encoders=False)))
    hred = dict(M.param_shapes(M.ModelConfig(30, 8, 10, arch="hred")))
    assert shared == hred
    assert set(separate) - set(shared) == {f"exemplar_encoder.{p}" for p in M.GRU_PARTS}
    assert shared["embedding"] == (30, 8)
    assert shared["encoder.W_z"] == (8, 10)
    assert shared["context.U_h"] == (10, 10)
    assert shared["out.W"] == (10, 30)


def test_init_is_seeded_and_scaled():
    cfg = M.ModelConfig(50, 16, 12, seed=4)
    a, b = M.init_params(cfg), M.init_params(cfg)
    for (name, x), y in zip(a.items(), b):
        assert np.array_equal(x.value, y.value)
        if name != "embedding":
            assert np.abs(x.value).max() <= cfg.init_scale
    assert a["embedding"].value.std() == pytest.approx(1.0, abs=0.1)
    flat = M.init_params(M.ModelConfig(50, 16, 12, seed=4, embedding_init_std=None))
    assert np.abs(flat["embedding"].value).max() <= 0.08


def test_encode_context_length_matches_architecture():
    for arch, n in (("hred", 2), ("exemplar", 3)):
        cfg = M.ModelConfig(20, 4, 6, arch=arch)
        params = M.init_params(cfg)
        vecs = [M.encode_utterance([5, 6, EOS_ID], params) for _ in range(n)]
        assert M.encode_context(vecs, params, cfg).shape == (6,)
        with pytest.raises(ValueError):
            M.encode_context(vecs[:-1], params, cfg)


def test_empty_utterance_rejected():
    params = M.init_params(M.ModelConfig(20, 4, 6))
    with pytest.raises(ValueError):
        M.encode_utterance([], params)


def test_padding_does_not_change_encoding():
    params = M.init_params(M.ModelConfig(20, 4, 6, seed=1))
    short = [5, 6, EOS_ID]
    alone = M.encode_utterances([short], params).value[0]
    padded = M.encode_utterances([short, [7, 8, 9, 10, 11, 12, EOS_ID]], params).value[0]
    assert np.allclose(alone, padded, atol=1e-12)


def test_architecture_batch_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        M.forward_loss(micro_batch(rng, exemplar=False), M.init_params(M.ModelConfig(20, 4, 6, arch="exemplar")),
                       M.ModelConfig(20, 4, 6, arch="exemplar"))
    with pytest.raises(ValueError):
        M.forward_loss(micro_batch(rng, exemplar=True), M.init_params(M.ModelConfig(20, 4, 6)),
                       M.ModelConfig(20, 4, 6))


def test_greedy_stops_at_eos_and_max_len():
    cfg = M.ModelConfig(20, 4, 6, max_decode_len=7)
    params = M.init_params(cfg)
    ctx = np.zeros((2, 6))
    # force EOS everywhere
    params["out.b"].value[:] = 0.0
    params["out.b"].value[EOS_ID] = 100.0
    assert M.decode_greedy(ctx, params, cfg) == [[], []]
    # never EOS: output length is capped
    params["out.b"].value[EOS_ID] = -100.0
    params["out.b"].value[9] = 100.0
    assert M.decode_greedy(ctx, params, cfg) == [[9] * 7, [9] * 7]
    assert M.decode_greedy(np.zeros(6), params, cfg, max_len=3) == [9, 9, 9]


def test_greedy_matches_teacher_forced_argmax():
    # decoding its own greedy output, the teacher-forced logits' argmax must reproduce it
    cfg = M.ModelConfig(20, 4, 6, seed=2, dropout=0.0, max_decode_len=6)
    params = M.init_params(cfg)
    batch = micro_batch(np.random.default_rng(3), exemplar=False, B=1)
    out = M.generate(batch, params, cfg)[0]
    ctx = M.context_vector(batch, params, cfg)
    h = M.initial_decoder_state(ctx, params)
    prev = [M.SOS_ID] + out
    ids = np.array(prev, dtype=np.int64)[:, None]
    states = M.gru_states(ad.embedding_lookup(params["embedding"], ids), params.gru("decoder"), h)
    picks = [int(np.argmax((s @ params["out.W"] + params["out.b"]).value[0])) for s in states]
    expected = out + [EOS_ID] if len(out) < cfg.max_decode_len else out
    assert picks[:len(expected)] == expected


def test_dropout_only_in_training():
    cfg = M.ModelConfig(20, 4, 6, dropout=0.5)
    params = M.init_params(cfg)
    batch = micro_batch(np.random.default_rng(0), exemplar=False)
    a = M.forward_loss(batch, params, cfg).item()
    b = M.forward_loss(batch, params, cfg, np.random.default_rng(1), training=False).item()
    c = M.forward_loss(batch, params, cfg, np.random.default_rng(1), training=True).item()
    assert a == b
    assert c != a


def test_config_validation():
    with pytest.raises(ValueError):
        M.ModelConfig(20, 0, 6)
    with pytest.raises(ValueError):
        M.ModelConfig(20, 4, 6, dropout=1.0)
    with pytest.raises(ValueError):
        M.ModelConfig(20, 4, 6, arch="transformer")
