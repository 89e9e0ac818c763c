"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 2 config/schema error, 3 data error, 4 numeric
abort. Logs go to stderr; artifacts go to the output directory, which is
locked for the duration of a run and described by a manifest at the end.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .autoencoder.model import Autoencoder, AutoencoderConfig
from .autoencoder.train import train_autoencoder
from .chem.data import read_dataset_csv
from .chem.smiles import parse_smiles, write_smiles
from .checkpoint import load_model, save_checkpoint
from .config import load_config
from .diffusion.conditioning import Condition
from .diffusion.dit import DiTConfig
from .diffusion.sample import decode_latents, generation_metrics, generation_records, sample_latents
from .diffusion.schedule import NoiseSchedule
from .diffusion.train import train_dit
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    NumericError,
    ParseError,
)
from .evolve.driver import (
    GLOBAL_OBJECTIVES,
    ModelBundle,
    OptimizationConfig,
    SyntheticAdmetOracle,
    normalize_objective_rows,
    optimization_report,
    run_optimization,
)
from .guidance import GuidanceSpec, make_property_loss, sample_guided
from .manifest import RunManifest, output_lock
from .normalization import PROPERTY_NAMES, denormalize_vector, normalize_dielectric
from .permeate import permeability_from_run_dir
from .prediction.heads import LSP, PredictorConfig, solvent_molecule
from .prediction.hybrid import BiasNetConfig, train_bias_net
from .prediction.metrics import rmse_per_property, stokes_error_rate
from .prediction.oracle import SyntheticOracle
from .prediction.properties import PropertyVector
from .prediction.train import record_targets, train_predictor

log = logging.getLogger("fluorgen")

SUBCOMMANDS = ("train-ae", "train-dit", "train-predictor", "calibrate", "predict",
               "generate", "optimize", "permeate", "report", "validate-data")

REPORT_COLUMNS = ["HV", "Emi", "Stokes", "LogE", "PLQY", "#Mols",
                  "success_rate_nn", "success_rate_hybrid"]


def _write_json(path, doc, manifest: RunManifest | None = None):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
    if manifest is not None:
        manifest.add_output(path)
    return path


def _write_jsonl(path, rows, manifest: RunManifest | None = None):
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True))
            handle.write("\n")
    if manifest is not None:
        manifest.add_output(path)
    return path


def _dataset_records(config, args):
    path = getattr(args, "dataset", None) or config.get("dataset")
    if not path:
        raise ConfigError("no dataset path given (config 'dataset' or --dataset)")
    return path, read_dataset_csv(path)


def _autoencoder_config(config) -> AutoencoderConfig:
    return AutoencoderConfig(**config.get("autoencoder", {}))


def _schedule(config) -> NoiseSchedule:
    s = config["schedule"]
    return NoiseSchedule.linear(s["t_max"], s["beta_start"], s["beta_end"])


def _checkpoint_path(config, key: str) -> str:
    path = config.get("checkpoints", {}).get(key)
    if not path:
        raise ConfigError(f"config checkpoints.{key} is required for this command")
    return path


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate_data(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    counts = {name: sum(1 for r in records if getattr(r, name) is not None)
              for name in PROPERTY_NAMES}
    doc = {"n_records": len(records), "label_counts": counts,
           "n_with_solvent": sum(1 for r in records if r.solvent_smiles),
           "n_with_dielectric": sum(1 for r in records if r.dielectric is not None)}
    _write_json(os.path.join(outdir, "validation.json"), doc, manifest)
    log.info("validated %d records", len(records))


def cmd_train_ae(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    corpus = [r.smiles for r in records]
    t = config["train"]
    model, history = train_autoencoder(
        corpus, _autoencoder_config(config), steps=t["steps"], batch_size=t["batch_size"],
        lr=t["lr"], lr_end=t["lr_end"], weight_decay=t["weight_decay"], seed=config["seed"])
    ckpt = os.path.join(outdir, "autoencoder.ckpt")
    save_checkpoint(ckpt, model.state())
    manifest.add_output(ckpt)
    _write_json(os.path.join(outdir, "train_history.json"),
                {"loss": history["loss"], "ce": history["ce"], "reg": history["reg"]}, manifest)


def cmd_train_dit(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    ae_path = _checkpoint_path(config, "autoencoder")
    manifest.add_input(ae_path)
    autoencoder: Autoencoder = load_model(ae_path)
    latents = np.stack([autoencoder.encode(r.molecule()) for r in records])
    labels, mask = record_targets(records)
    dielectric = np.array([normalize_dielectric(r.dielectric) if r.dielectric is not None else 0.0
                           for r in records])
    d_mask = np.array([1.0 if r.dielectric is not None else 0.0 for r in records])
    cond_values = np.concatenate([labels, dielectric[:, None]], axis=1)
    cond_mask = np.concatenate([mask, d_mask[:, None]], axis=1)
    schedule = _schedule(config)
    dit_cfg = DiTConfig(latent_p=autoencoder.config.p, latent_h=autoencoder.config.h,
                        t_max=schedule.t_max, **config.get("dit", {}))
    t = config["train"]
    model, history = train_dit(latents, cond_values, cond_mask, dit_cfg, schedule,
                               steps=t["steps"], batch_size=t["batch_size"], lr=t["lr"],
                               lr_end=t["lr_end"], weight_decay=t["weight_decay"],
                               seed=config["seed"])
    ckpt = os.path.join(outdir, "dit.ckpt")
    save_checkpoint(ckpt, model.state())
    manifest.add_output(ckpt)
    _write_json(os.path.join(outdir, "train_history.json"), {"loss": history["loss"]}, manifest)


def cmd_train_predictor(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    pred_cfg = dict(config.get("predictor", {}))
    kind = pred_cfg.pop("kind", "agp")
    steps = pred_cfg.pop("steps", 600)
    batch_size = pred_cfg.pop("batch_size", 16)
    lr = pred_cfg.pop("lr", 2e-3)
    autoencoder = None
    if kind == "lsp":
        ae_path = _checkpoint_path(config, "autoencoder")
        manifest.add_input(ae_path)
        autoencoder = load_model(ae_path)
    model = train_predictor(records, kind, autoencoder=autoencoder,
                            config=PredictorConfig(**pred_cfg), steps=steps,
                            batch_size=batch_size, lr=lr, seed=config["seed"])
    ckpt = os.path.join(outdir, f"{kind}.ckpt")
    save_checkpoint(ckpt, model.state())
    manifest.add_output(ckpt)


def cmd_calibrate(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    cal = config.get("calibration", {})
    oracle = SyntheticOracle(
        seed=cal.get("oracle_seed", config["seed"]), bias=cal.get("bias", "cluster"),
        n_clusters=cal.get("n_clusters", 4), noise_nm=cal.get("noise_nm", 5.0),
        affine=(cal.get("affine_scale", 1.1), cal.get("affine_shift", 30.0)))
    pairs, trues, raws = [], [], []
    for rec in records:
        mol = rec.molecule()
        solvent = solvent_molecule(rec.solvent_smiles)
        eps = rec.dielectric if rec.dielectric is not None else 78.0
        truth = oracle.true_properties(mol, eps)[:2]
        raw = oracle.raw(mol, eps)[:2]
        pairs.append((mol, solvent, raw, truth))
        trues.append(truth)
        raws.append(raw)
    holdout = max(1, int(len(pairs) * cal.get("holdout_fraction", 0.25)))
    train_pairs, test_pairs = pairs[holdout:], pairs[:holdout]
    model = train_bias_net(train_pairs, BiasNetConfig(), steps=cal.get("steps", 400),
                           batch_size=cal.get("batch_size", 16), lr=cal.get("lr", 3e-3),
                           seed=config["seed"])
    test_raw = np.array([p[2] for p in test_pairs])
    test_true = np.array([p[3] for p in test_pairs])
    calibrated = model.calibrate_batch([p[0] for p in test_pairs], [p[1] for p in test_pairs],
                                       test_raw).data
    raw_rmse = float(np.sqrt(np.mean((test_raw - test_true) ** 2)))
    cal_rmse = float(np.sqrt(np.mean((calibrated - test_true) ** 2)))
    ckpt = os.path.join(outdir, "biasnet.ckpt")
    save_checkpoint(ckpt, model.state())
    manifest.add_output(ckpt)
    _write_json(os.path.join(outdir, "calibration_report.json"),
                {"n_train": len(train_pairs), "n_holdout": len(test_pairs),
                 "raw_rmse_nm": raw_rmse, "calibrated_rmse_nm": cal_rmse,
                 "bias_mode": oracle.bias}, manifest)
    log.info("calibration: raw RMSE %.2f nm -> calibrated %.2f nm", raw_rmse, cal_rmse)


def cmd_predict(args, config, outdir, manifest):
    path, records = _dataset_records(config, args)
    manifest.add_input(path)
    pred_path = _checkpoint_path(config, "predictor")
    manifest.add_input(pred_path)
    model = load_model(pred_path)
    mols = [r.molecule() for r in records]
    solvents = [solvent_molecule(r.solvent_smiles) for r in records]
    if isinstance(model, LSP):
        ae_path = _checkpoint_path(config, "autoencoder")
        manifest.add_input(ae_path)
        autoencoder = load_model(ae_path)
        latents = np.stack([autoencoder.encode(m) for m in mols])
        from .tensor import Tensor
        preds_n = model.predict_latent(Tensor(latents), solvents).data
    else:
        preds_n, _ = model.predict_batch(mols, solvents)
        preds_n = preds_n.data
    preds = denormalize_vector(preds_n)
    csv_path = os.path.join(outdir, "predictions.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "abs_pred", "emi_pred", "loge_pred", "plqy_pred"])
        for i, row in enumerate(preds):
            writer.writerow([i, repr(float(row[0])), repr(float(row[1])),
                             repr(float(row[2])), repr(float(row[3]))])
    manifest.add_output(csv_path)

    labels, mask = record_targets(records)
    labels_raw = denormalize_vector(labels)
    labels_raw[mask == 0] = 0.0
    metrics = {"rmse": rmse_per_property(preds, labels_raw, mask)}
    both = [i for i in range(len(records)) if mask[i, 0] and mask[i, 1]]
    if both:
        pv_pred = [PropertyVector(abs_nm=float(preds[i, 0]), emi_nm=float(preds[i, 1])) for i in both]
        pv_true = [PropertyVector(abs_nm=float(labels_raw[i, 0]), emi_nm=float(labels_raw[i, 1]))
                   for i in both]
        metrics["stokes_error_rate"] = stokes_error_rate(pv_pred, pv_true)
    _write_json(os.path.join(outdir, "metrics.json"), metrics, manifest)


def cmd_generate(args, config, outdir, manifest):
    ae_path = _checkpoint_path(config, "autoencoder")
    dit_path = _checkpoint_path(config, "dit")
    manifest.add_input(ae_path)
    manifest.add_input(dit_path)
    autoencoder = load_model(ae_path)
    dit = load_model(dit_path)
    schedule = _schedule(config)
    gen = config["generate"]
    n = args.n if getattr(args, "n", None) else gen["n"]
    prompt = {k: v for k, v in gen.get("prompt", {}).items() if v is not None}
    cond = Condition.from_raw(**prompt) if prompt else Condition.unconditional()

    gspec_cfg = config["guidance"]
    seed = config["seed"]
    if gspec_cfg["kind"] != "none":
        spec = GuidanceSpec.from_dict(gspec_cfg)
        lsp_path = _checkpoint_path(config, "lsp")
        manifest.add_input(lsp_path)
        lsp = load_model(lsp_path)
        solvent = parse_smiles("O")
        loss_fn = make_property_loss(spec, lsp, solvent)
        latents = sample_guided(dit, schedule, cond, spec, loss_fn, n, seed)
    else:
        latents = sample_latents(dit, schedule, cond, n, seed)

    training_canonical: set[str] = set()
    dataset_path = getattr(args, "dataset", None) or config.get("dataset")
    if dataset_path:
        manifest.add_input(dataset_path)
        for rec in read_dataset_csv(dataset_path):
            training_canonical.add(write_smiles(rec.molecule()))
    decoded = decode_latents(latents, autoencoder, beam_size=gen["beam_size"])
    records = generation_records(decoded, cond, seed, training_canonical)
    _write_jsonl(os.path.join(outdir, "samples.jsonl"), records, manifest)
    _write_json(os.path.join(outdir, "gen_metrics.json"), generation_metrics(records), manifest)


def cmd_optimize(args, config, outdir, manifest):
    ae_path = _checkpoint_path(config, "autoencoder")
    dit_path = _checkpoint_path(config, "dit")
    manifest.add_input(ae_path)
    manifest.add_input(dit_path)
    autoencoder = load_model(ae_path)
    dit = load_model(dit_path)
    schedule = _schedule(config)
    opt = dict(config["optimize"])
    guidance = GuidanceSpec.from_dict(config["guidance"])
    run_cfg = OptimizationConfig(guidance=guidance, seed=config["seed"], **opt)

    lsp = None
    if "lsp" in config.get("checkpoints", {}) and config["checkpoints"]["lsp"]:
        manifest.add_input(config["checkpoints"]["lsp"])
        lsp = load_model(config["checkpoints"]["lsp"])
    agp = None
    if "agp" in config.get("checkpoints", {}) and config["checkpoints"]["agp"]:
        manifest.add_input(config["checkpoints"]["agp"])
        agp = load_model(config["checkpoints"]["agp"])
    bundle = ModelBundle(autoencoder=autoencoder, dit=dit, schedule=schedule, lsp=lsp, agp=agp,
                         admet_oracle=SyntheticAdmetOracle(config["seed"]) if run_cfg.mode == "admet" else None)
    result = run_optimization(run_cfg, bundle)

    traj_path = os.path.join(outdir, "trajectory.csv")
    with open(traj_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "objective", "mean", "q25", "q75"])
        for row in result["trajectory"]:
            writer.writerow([row["step"], row["objective"],
                             "" if row["mean"] is None else repr(row["mean"]),
                             "" if row["q25"] is None else repr(row["q25"]),
                             "" if row["q75"] is None else repr(row["q75"])])
    manifest.add_output(traj_path)

    pareto_rows = []
    for ind in result["pareto"]:
        pareto_rows.append({
            "smiles": ind.smiles,
            "objectives": {n: float(v) for n, v in zip(result["objective_names"], ind.raw_objectives)},
            "constraints": [{"name": n, "ok": ok, "value": float(v)} for n, ok, v in ind.constraints],
            "generation": ind.generation,
        })
    _write_jsonl(os.path.join(outdir, "pareto.jsonl"), pareto_rows, manifest)

    physics = None
    if run_cfg.mode in ("global", "fragment"):
        oracle = SyntheticOracle(seed=config["seed"])
        solvent_eps = 78.0

        def physics(mol):
            t = oracle.true_properties(mol, solvent_eps)
            raw = np.array([[t[1], t[1] - t[0], t[2], t[3]]])
            return normalize_objective_rows(GLOBAL_OBJECTIVES, raw)[0]

    report = optimization_report(result, physics_evaluator=physics)
    _write_json(os.path.join(outdir, "report.json"), report, manifest)


def cmd_permeate(args, config, outdir, manifest):
    perm = config.get("permeate", {})
    input_dir = getattr(args, "input", None) or perm.get("input_dir")
    if not input_dir:
        raise ConfigError("permeate needs config permeate.input_dir or --input")
    result = permeability_from_run_dir(input_dir, perm.get("temperature_k", 310.0))
    for name in ("pmf.csv",):
        manifest.add_input(os.path.join(input_dir, name))
    _write_json(os.path.join(outdir, "permeability.json"), result, manifest)
    log.info("log10 P_eff = %.3f cm/s", result["log10_p_eff_cm_per_s"])


def cmd_report(args, config, outdir, manifest):
    run_dir = getattr(args, "run_dir", None) or outdir
    found = {}
    gaps = []
    for name in ("metrics.json", "gen_metrics.json", "report.json",
                 "permeability.json", "calibration_report.json"):
        path = os.path.join(run_dir, name)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as handle:
                found[name] = json.load(handle)
        else:
            gaps.append(name)
    if not found:
        raise DataError(f"no report artifacts found in {run_dir}")

    summary = {"source_dir": os.path.abspath(run_dir), "gaps": gaps}
    summary.update({name.replace(".json", ""): doc for name, doc in found.items()})
    _write_json(os.path.join(outdir, "summary.json"), summary, manifest)

    opt = found.get("report.json", {})
    maxes = opt.get("max", {})
    row = {
        "HV": opt.get("hv"),
        "Emi": maxes.get("emi_nm"),
        "Stokes": maxes.get("stokes"),
        "LogE": maxes.get("loge"),
        "PLQY": maxes.get("plqy"),
        "#Mols": opt.get("n_mols"),
        "success_rate_nn": opt.get("success_rate_nn"),
        "success_rate_hybrid": opt.get("success_rate_hybrid"),
    }
    csv_path = os.path.join(outdir, "summary.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        writer.writerow(["" if row[c] is None else row[c] for c in REPORT_COLUMNS])
    manifest.add_output(csv_path)


HANDLERS = {
    "validate-data": cmd_validate_data,
    "train-ae": cmd_train_ae,
    "train-dit": cmd_train_dit,
    "train-predictor": cmd_train_predictor,
    "calibrate": cmd_calibrate,
    "predict": cmd_predict,
    "generate": cmd_generate,
    "optimize": cmd_optimize,
    "permeate": cmd_permeate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluorgen",
                                     description="fluorophore inverse-design pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--output", help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, help="override config seed")
        if name in ("train-ae", "train-dit", "train-predictor", "calibrate",
                    "predict", "generate", "validate-data"):
            p.add_argument("--dataset", help="dataset CSV (overrides config)")
        if name == "generate":
            p.add_argument("--n", type=int, help="number of samples")
        if name == "permeate":
            p.add_argument("--input", help="directory with pmf.csv and windows/")
        if name == "report":
            p.add_argument("--run-dir", dest="run_dir", help="directory holding run artifacts")
    return parser


def cli_dispatch(argv) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        config = load_config(args.config) if args.config else load_config_from_defaults()
        if getattr(args, "seed", None) is not None:
            config["seed"] = args.seed
        outdir = args.output or config.get("output_dir")
        if not outdir:
            raise ConfigError("no output directory (config output_dir or --output)")
        os.makedirs(outdir, exist_ok=True)
        with output_lock(outdir):
            manifest = RunManifest(outdir, config, config["seed"])
            HANDLERS[args.command](args, config, outdir, manifest)
            manifest.write()
        return 0
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (DataError, ParseError) as exc:
        log.error("data error: %s", exc)
        return 3
    except NumericError as exc:
        log.error("numeric abort: %s", exc)
        return 4
    except (ContractError, CheckpointError) as exc:
        log.error("%s", exc)
        return 2


def load_config_from_defaults() -> dict:
    from .config import validate_config
    return validate_config({})


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
