import numpy as np
import pytest
import torch

from ebbridge.adapter import (
    Adapter,
    AdapterTrainConfig,
    FrozenLmError,
    pair_loss,
    load_adapter,
    project_beliefs,
    save_adapter,
    train_adapter,
    _encode_pair,
)
from ebbridge.lm import BOS, EOS, PAD, LmConfig, TinyCausalLM, build_vocab


def tiny_lm(vocab, seed=0):
    torch.manual_seed(seed)
    return TinyCausalLM(LmConfig(vocab_size=len(vocab), d_model=16,
                                 n_heads=2, n_layers=1, max_len=48))


TEXTS = ["write a review :", "good product works", "bad product broke"]


class TestProjection:
    def test_shape(self):
        adapter = Adapter(belief_dim=5, embed_dim=16, n_prompts=8)
        out = project_beliefs(np.zeros(5), adapter)
        assert out.shape == (8, 16)

    def test_zero_weight_adapter_constant(self):
        adapter = Adapter(5, 16, 8)
        with torch.no_grad():
            for param in adapter.parameters():
                param.zero_()
        np.testing.assert_array_equal(project_beliefs(np.ones(5), adapter),
                                      np.zeros((8, 16)))

    def test_identical_beliefs_identical_output(self):
        adapter = Adapter(5, 16, 4)
        b = np.random.default_rng(0).random(5)
        np.testing.assert_array_equal(project_beliefs(b, adapter),
                                      project_beliefs(b.copy(), adapter))

    def test_width_mismatch(self):
        adapter = Adapter(5, 16, 4)
        with pytest.raises(ValueError, match="width"):
            project_beliefs(np.zeros(6), adapter)

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            Adapter(0, 16, 4)
        with pytest.raises(ValueError):
            Adapter(5, 16, 0)


class TestLossMasking:
    def test_only_review_positions_scored(self):
        # oracle: manual log-softmax summed over the review span only
        vocab = build_vocab(TEXTS)
        lm = tiny_lm(vocab)
        adapter = Adapter(3, 16, n_prompts=4)
        tokens_list, labels_list = _encode_pair(
            "write a review :", "good product works", vocab, 48, 4)
        beliefs = torch.rand(1, 3)
        tokens = torch.tensor([tokens_list])
        labels = torch.tensor([labels_list])
        loss = pair_loss(lm, adapter, beliefs, tokens, labels)

        with torch.no_grad():
            embeds = torch.cat([adapter(beliefs), lm.embed_tokens(tokens)], 1)
            logp = torch.log_softmax(lm(embeds)[0, :-1], dim=-1)
        scored = [(j, t) for j, t in enumerate(labels_list) if t != PAD]
        manual = -np.mean([float(logp[j, t]) for j, t in scored])
        assert abs(float(loss.detach()) - manual) < 1e-5

    def test_prompt_span_is_masked(self):
        vocab = build_vocab(TEXTS)
        n_prompts = 4
        tokens, labels = _encode_pair("write a review :", "good product",
                                      vocab, 48, n_prompts)
        prompt_len = 1 + len(vocab.encode("write a review :"))
        assert labels[:n_prompts + prompt_len - 1] == \
            [PAD] * (n_prompts + prompt_len - 1)
        assert labels[n_prompts + prompt_len - 1:] == \
            vocab.encode("good product") + [EOS]
        assert tokens[0] == BOS


class TestTraining:
    def _pairs(self, vocab, n=6):
        rng = np.random.default_rng(0)
        return [(rng.random(3), "write a review :",
                 ["good product works", "bad product broke"][i % 2])
                for i in range(n)]

    def test_zero_lr_no_change(self):
        vocab = build_vocab(TEXTS)
        lm = tiny_lm(vocab)
        cfg = AdapterTrainConfig(epochs=2, learning_rate=0.0, n_prompts=4,
                                 seed=1)
        adapter, _ = train_adapter(self._pairs(vocab), lm, vocab, cfg)
        torch.manual_seed(cfg.seed)
        fresh = Adapter(3, lm.embedding_dim, cfg.n_prompts)
        for p_trained, p_fresh in zip(adapter.parameters(),
                                      fresh.parameters()):
            assert torch.equal(p_trained, p_fresh)

    def test_empty_pairs_rejected(self):
        vocab = build_vocab(TEXTS)
        with pytest.raises(ValueError, match="empty"):
            train_adapter([], tiny_lm(vocab), vocab)

    def test_loss_decreases(self):
        vocab = build_vocab(TEXTS)
        lm = tiny_lm(vocab)
        _, history = train_adapter(
            self._pairs(vocab, 20), lm, vocab,
            AdapterTrainConfig(epochs=15, learning_rate=1e-2, n_prompts=4))
        assert history[-1] < history[0]

    def test_lm_unchanged_by_training(self):
        from ebbridge.lm import lm_checksum
        vocab = build_vocab(TEXTS)
        lm = tiny_lm(vocab)
        before = lm_checksum(lm)
        train_adapter(self._pairs(vocab), lm, vocab,
                      AdapterTrainConfig(epochs=2, n_prompts=4))
        assert lm_checksum(lm) == before

    def test_drift_detected(self):
        class DriftingLM(TinyCausalLM):
            def forward(self, inputs_embeds, return_hidden=False,
                        pos_offset=0):
                with torch.no_grad():
                    self.tok_emb.weight += 1e-4
                return super().forward(inputs_embeds, return_hidden,
                                       pos_offset)

        vocab = build_vocab(TEXTS)
        torch.manual_seed(0)
        lm = DriftingLM(LmConfig(vocab_size=len(vocab), d_model=16,
                                 n_heads=2, n_layers=1, max_len=48))
        with pytest.raises(FrozenLmError):
            train_adapter(self._pairs(vocab), lm, vocab,
                          AdapterTrainConfig(epochs=1, n_prompts=4))

    def test_deterministic(self):
        from ebbridge.lm import lm_checksum
        vocab = build_vocab(TEXTS)
        lm = tiny_lm(vocab)
        cfg = AdapterTrainConfig(epochs=3, n_prompts=4, seed=7)
        _, h1 = train_adapter(self._pairs(vocab), lm, vocab, cfg)
        _, h2 = train_adapter(self._pairs(vocab), lm, vocab, cfg)
        assert h1 == h2


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        adapter = Adapter(5, 16, 4)
        save_adapter(adapter, tmp_path / "a.pt")
        loaded = load_adapter(tmp_path / "a.pt")
        b = np.random.default_rng(1).random(5)
        np.testing.assert_array_equal(project_beliefs(b, adapter),
                                      project_beliefs(b, loaded))


class TestTrainedAdapter:
    def test_rating_changes_projection(self, toy_bridge):
        world = toy_bridge["world"]
        adapter = toy_bridge["adapter"]
        by_rating = {}
        for i, row in enumerate(world.test.rows):
            by_rating.setdefault(row["rating"], i)
        a = project_beliefs(world.test_beliefs.matrix[by_rating["5"]], adapter)
        b = project_beliefs(world.test_beliefs.matrix[by_rating["1"]], adapter)
        assert np.linalg.norm(a - b) > 0

    def test_training_loss_decreased(self, toy_bridge):
        history = toy_bridge["adapter_history"]
        assert history[-1] < history[0]
