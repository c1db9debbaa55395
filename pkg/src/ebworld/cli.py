"""Command-line surface tying schema, rbm, dbm and intervention together.

Commands: synth, pretrain, finetune, score, intervene, sample,
export-beliefs, report. All randomness flows from the config seed through
named sub-seeds so each stage can be re-run independently and every
artifact is byte-reproducible.

Exit codes: 0 success, 1 validation, 2 I/O, 3 incompatibility.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import zlib

import numpy as np

from . import beliefs as belief_io
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .dbm import (
    MeanFieldConfig,
    PcdConfig,
    finetune_pcd,
    gibbs_sample_dbm,
    mean_field_infer,
    belief_vector,
    pretrain_layerwise,
    variational_free_energy,
)
from .intervention import (
    InterventionSpec,
    format_grid_table,
    grid_to_delimited,
    run_experiment_grid,
)
from .rbm import CdConfig
from .schema import (
    Dataset,
    IngestError,
    InvalidVectorError,
    SchemaError,
    SyntheticConfig,
    check_visible,
    decode,
    encode,
    generate_synthetic_market,
    ingest,
    load_schema,
    save_dataset,
    split,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INCOMPATIBLE = 3


def sub_seed(seed: int, name: str) -> int:
    """Named deterministic sub-seed derived from the single config seed."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())])
               .generate_state(1)[0])


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def _cd_config(cfg: dict, seed: int) -> CdConfig:
    d = cfg.get("cd", {})
    return CdConfig(
        k=d.get("k", 1),
        learning_rate=d.get("learning_rate", 0.05),
        batch_size=d.get("batch_size", 32),
        epochs=d.get("epochs", 10),
        weight_init_std=d.get("weight_init_std", 0.01),
        seed=seed,
        momentum=d.get("momentum", 0.0),
        weight_decay=d.get("weight_decay", 0.0),
        init_visible_bias_from_means=d.get("init_visible_bias_from_means", False),
    )


def _pcd_config(cfg: dict, seed: int) -> PcdConfig:
    d = cfg.get("pcd", {})
    return PcdConfig(
        chain_count=d.get("chain_count", d.get("batch_size", 32)),
        gibbs_steps_per_update=d.get("gibbs_steps_per_update", 5),
        learning_rate=d.get("learning_rate", 0.02),
        epochs=d.get("epochs", 10),
        batch_size=d.get("batch_size", 32),
        seed=seed,
    )


def _mf_config(cfg: dict) -> MeanFieldConfig:
    d = cfg.get("mean_field", {})
    return MeanFieldConfig(
        max_iterations=d.get("max_iterations", 200),
        tolerance=d.get("tolerance", 1e-8),
        damping=d.get("damping", 0.0),
    )


def _require_seed(cfg: dict, override: int | None) -> int:
    if override is not None:
        return override
    if "seed" not in cfg:
        raise SchemaError("config must declare a seed")
    return int(cfg["seed"])


def _load_dataset(path, schema, strict: bool) -> Dataset:
    dataset, errors = ingest(path, schema, strict=strict)
    for msg in errors:
        print(f"warning: {msg}", file=sys.stderr)
    return dataset


def _check_dataset_schema(dataset_schema, ckpt_schema):
    if dataset_schema != ckpt_schema:
        for g in dataset_schema.group_names():
            if g not in ckpt_schema.group_names() or \
                    dataset_schema.categories(g) != ckpt_schema.categories(g):
                raise CheckpointError(f"dataset group {g!r} incompatible with checkpoint")
        raise CheckpointError("dataset schema incompatible with checkpoint")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_json(args.config)
    seed = _require_seed(cfg, args.seed)
    schema = load_schema(cfg["schema"])
    syn = SyntheticConfig.from_dict(cfg["synthetic"])
    dataset = generate_synthetic_market(schema, syn, sub_seed(seed, "synth"))
    if "split" in cfg:
        dataset = split(dataset, {k: int(v) for k, v in cfg["split"].items()},
                        sub_seed(seed, "split"))
        for name in cfg["split"]:
            save_dataset(dataset.subset(name), f"{args.out}.{name}.csv")
    save_dataset(dataset, args.out)
    return EXIT_OK


def cmd_pretrain(args) -> int:
    cfg = _load_json(args.config)
    seed = _require_seed(cfg, args.seed)
    schema = load_schema(cfg["schema"])
    dataset = _load_dataset(args.dataset, schema, args.strict)
    cd_cfg = _cd_config(cfg, sub_seed(seed, "pretrain"))
    params, histories = pretrain_layerwise(
        dataset.vectors.astype(float), cfg["layer_sizes"], cd_cfg
    )
    save_checkpoint(args.out, schema, params, {
        "config_hash": _config_hash(cfg),
        "pretrain_epochs": str(cd_cfg.epochs),
        "finetune_epochs": "0",
    })
    with open(args.out + ".log", "w", encoding="utf-8", newline="\n") as fh:
        for l, history in enumerate(histories, start=1):
            for epoch, err in enumerate(history, start=1):
                fh.write(f"stage=pretrain layer={l} epoch={epoch} "
                         f"recon_error={err:.9g}\n")
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = _load_json(args.config)
    seed = _require_seed(cfg, args.seed)
    ckpt_schema, params, provenance = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset, ckpt_schema, args.strict)
    pcd_cfg = _pcd_config(cfg, sub_seed(seed, "finetune"))
    params, history = finetune_pcd(
        params, dataset.vectors.astype(float), _mf_config(cfg), pcd_cfg
    )
    provenance = dict(provenance)
    provenance["config_hash"] = _config_hash(cfg)
    provenance["finetune_epochs"] = str(
        int(provenance.get("finetune_epochs", "0")) + pcd_cfg.epochs
    )
    save_checkpoint(args.out, ckpt_schema, params, provenance)
    with open(args.out + ".log", "w", encoding="utf-8", newline="\n") as fh:
        for epoch, gn in enumerate(history, start=1):
            fh.write(f"stage=finetune epoch={epoch} grad_norm={gn:.9g}\n")
    return EXIT_OK


def cmd_score(args) -> int:
    schema, params, _ = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset, schema, args.strict)
    _check_dataset_schema(dataset.schema, schema)
    mf_cfg = MeanFieldConfig()
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,free_energy,mf_iterations,converged\n")
        for i, v in enumerate(dataset.vectors):
            state = mean_field_infer(v.astype(float), params, mf_cfg)
            f = variational_free_energy(v.astype(float), params, mf_cfg, state=state)
            fh.write(f"{i},{f:.9g},{state.iterations},{int(state.converged)}\n")
    return EXIT_OK


def _parse_grid_specs(grid_cfg: dict) -> list[InterventionSpec]:
    specs = []
    for d in grid_cfg["specs"]:
        specs.append(InterventionSpec(
            group_name=d["group"],
            target_category=d["target"],
            source_filter=d.get("source"),
            strata=tuple((g, c) for g, c in d.get("strata", [])),
        ))
    return specs


def cmd_intervene(args) -> int:
    schema, params, _ = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset, schema, args.strict)
    grid_cfg = _load_json(args.grid)
    specs = _parse_grid_specs(grid_cfg)
    report = run_experiment_grid(dataset.vectors, specs, schema, params)
    with open(args.out + ".csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(grid_to_delimited(report))
    with open(args.out + ".txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_grid_table(report))
    with open(args.out + ".details.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("spec,stratum,id,f_orig,f_intervened,delta_pct\n")
        for cell in report.cells:
            if cell.result is None:
                continue
            stratum = ";".join(f"{g}={v}" for g, v in cell.spec.strata)
            r = cell.result
            for rid, fo, fi, d in zip(r.sample_ids, r.f_orig, r.f_intervened,
                                      r.delta_pct):
                fh.write(f"{cell.spec.label()},{stratum},{rid},"
                         f"{fo:.9g},{fi:.9g},{d:.9g}\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    schema, params, _ = load_checkpoint(args.checkpoint)
    profiles = []
    resampled = 0
    attempt = 0
    while len(profiles) < args.n and attempt < 50:
        need = args.n - len(profiles)
        batch = gibbs_sample_dbm(params, need, args.burn_in, args.thin,
                                 sub_seed(args.seed, f"sample{attempt}"))
        for row in batch:
            try:
                check_visible(row, schema)
            except InvalidVectorError:
                resampled += 1
                continue
            profiles.append(decode(row, schema))
        attempt += 1
    vectors = (np.stack([encode(p, schema) for p in profiles]) if profiles
               else np.zeros((0, schema.visible_dim), dtype=np.uint8))
    dataset = Dataset(schema, profiles, vectors)
    save_dataset(dataset, args.out)
    print(f"sampled={len(profiles)} resampled={resampled}")
    return EXIT_OK


def cmd_export_beliefs(args) -> int:
    schema, params, _ = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset, schema, args.strict)
    _check_dataset_schema(dataset.schema, schema)
    mf_cfg = MeanFieldConfig()
    if len(dataset) == 0:
        matrix = np.zeros((0, sum(params.hidden_dims)))
    else:
        state = mean_field_infer(dataset.vectors.astype(float), params, mf_cfg)
        matrix = belief_vector(state)
    if args.format == "text":
        belief_io.write_beliefs_text(args.out, range(len(dataset)), matrix)
    else:
        belief_io.write_beliefs_binary(args.out, list(params.hidden_dims), matrix)
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.grid, encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    table = "\n".join(
        "  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip()
        for row in rows
    ) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebworld", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **flags):
        sp = sub.add_parser(name)
        for flag, kwargs in flags.items():
            sp.add_argument(flag, **kwargs)
        sp.set_defaults(fn=fn)
        return sp

    add("synth", cmd_synth,
        **{"--config": dict(required=True), "--out": dict(required=True),
           "--seed": dict(type=int, default=None)})
    add("pretrain", cmd_pretrain,
        **{"--config": dict(required=True), "--dataset": dict(required=True),
           "--out": dict(required=True), "--seed": dict(type=int, default=None),
           "--strict": dict(action="store_true")})
    add("finetune", cmd_finetune,
        **{"--config": dict(required=True), "--checkpoint": dict(required=True),
           "--dataset": dict(required=True), "--out": dict(required=True),
           "--seed": dict(type=int, default=None),
           "--strict": dict(action="store_true")})
    add("score", cmd_score,
        **{"--checkpoint": dict(required=True), "--dataset": dict(required=True),
           "--out": dict(required=True), "--strict": dict(action="store_true")})
    add("intervene", cmd_intervene,
        **{"--checkpoint": dict(required=True), "--dataset": dict(required=True),
           "--grid": dict(required=True), "--out": dict(required=True),
           "--strict": dict(action="store_true")})
    add("sample", cmd_sample,
        **{"--checkpoint": dict(required=True), "--n": dict(type=int, required=True),
           "--seed": dict(type=int, required=True),
           "--burn-in": dict(type=int, default=1000, dest="burn_in"),
           "--thin": dict(type=int, default=1), "--out": dict(required=True)})
    add("export-beliefs", cmd_export_beliefs,
        **{"--checkpoint": dict(required=True), "--dataset": dict(required=True),
           "--format": dict(choices=["text", "binary"], default="text"),
           "--out": dict(required=True), "--strict": dict(action="store_true")})
    add("report", cmd_report,
        **{"--grid": dict(required=True), "--out": dict(default=None)})
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SchemaError, InvalidVectorError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
