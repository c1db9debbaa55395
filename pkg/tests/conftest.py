import pytest

from support import MARKET_TABLES  # noqa: F401  (re-exported fixture data)

from ebworld.schema import AttributeSchema


@pytest.fixture
def toy_schema():
    return AttributeSchema(
        groups=(
            ("brand", ("A", "B")),
            ("tier", ("Entry", "Premium")),
            ("rating", ("1", "2", "3", "4", "5")),
        ),
    )


@pytest.fixture
def market_schema():
    return AttributeSchema(
        groups=(
            ("brand", ("Lux", "Generic")),
            ("tier", ("Entry", "Mid", "Premium")),
            ("rating", ("low", "mid", "high")),
        ),
    )


@pytest.fixture(scope="session")
def market_model():
    """DBM trained on the planted market, with held-out test split."""
    from ebworld.dbm import MeanFieldConfig, PcdConfig, finetune_pcd, pretrain_layerwise
    from ebworld.rbm import CdConfig
    from ebworld.schema import SyntheticConfig, generate_synthetic_market, split

    schema = AttributeSchema(
        groups=(
            ("brand", ("Lux", "Generic")),
            ("tier", ("Entry", "Mid", "Premium")),
            ("rating", ("low", "mid", "high")),
        ),
    )
    ds = generate_synthetic_market(schema, SyntheticConfig(6000, MARKET_TABLES), 101)
    ds = split(ds, {"train": 4500, "test": 1500}, seed=102)
    train, test = ds.subset("train"), ds.subset("test")
    cd = CdConfig(k=1, learning_rate=0.05, batch_size=64, epochs=40, seed=103,
                  init_visible_bias_from_means=True)
    params, _ = pretrain_layerwise(train.vectors.astype(float), [10, 6], cd)
    pcd = PcdConfig(chain_count=100, gibbs_steps_per_update=5, learning_rate=0.02,
                    epochs=20, batch_size=64, seed=104)
    mf = MeanFieldConfig()
    params, _ = finetune_pcd(params, train.vectors.astype(float), mf, pcd)
    return {"schema": schema, "params": params, "train": train, "test": test,
            "mf": mf}
