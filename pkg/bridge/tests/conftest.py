import pytest

from ebbridge.adapter import AdapterTrainConfig, train_adapter
from ebbridge.generate import PromptTemplate
from ebbridge.lm import LmConfig, PretrainConfig, build_vocab, freeze_lm, \
    pretrain_lm
from ebbridge.pipeline import build_world, pretrain_corpus, reviewed_subset


@pytest.fixture(scope="session")
def toy_bridge(tmp_path_factory):
    """Full pipeline: upstream world, pretrained frozen LM, trained adapter."""
    root = tmp_path_factory.mktemp("toy_bridge")
    world = build_world(root / "world", seed=0, n_train=600, n_test=200)
    template = PromptTemplate()
    corpus = pretrain_corpus(world.train, template, seed=0)
    vocab = build_vocab(corpus)
    lm, lm_history = pretrain_lm(corpus, vocab, LmConfig(vocab_size=len(vocab)),
                                 PretrainConfig(epochs=40, seed=0))
    checksum = freeze_lm(lm)
    reviewed, reviewed_beliefs = reviewed_subset(world.train,
                                                 world.train_beliefs)
    pairs = [(reviewed_beliefs.matrix[i], template.render(row), text)
             for i, (row, text) in enumerate(zip(reviewed.rows,
                                                 reviewed.texts))]
    adapter, adapter_history = train_adapter(
        pairs, lm, vocab, AdapterTrainConfig(epochs=80, learning_rate=1e-2,
                                             seed=0))
    return {"world": world, "template": template, "vocab": vocab, "lm": lm,
            "lm_checksum": checksum, "lm_history": lm_history,
            "adapter": adapter, "adapter_history": adapter_history,
            "pairs": pairs}
