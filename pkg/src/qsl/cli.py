"""``shadowctl``: dataset generation, training, evaluation, faithfulness, oracles.

Exit codes: 0 success, 1 check failure, 2 usage or config error, 3 I/O error.
Run directories hold a config copy, an append-only ``metrics.csv`` (one row
per completed epoch), a ``checkpoint.qslw`` refreshed at every epoch so runs
resume at epoch boundaries, and a recomputable ``summary.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import data as qsl_data
from .errors import QslError, SchemaViolationError
from .evaluate import evaluate_dfe, evaluate_qst, faith_report
from .network import ModelConfig, build_model
from .oracles import CHECKS, run_check
from .training import AdamWState, TrainConfig, load_checkpoint, save_checkpoint, train

METRIC_COLUMNS = ["epoch", "train_loss", "test_loss", "test_fq_mean", "test_e1_mean",
                  "test_e2_mean"]

TRAIN_DEFAULTS = {
    "batch_size": 32,
    "lr": 2e-4,
    "beta1": 0.9,
    "beta2": 0.99,
    "weight_decay": 0.01,
    "seed": 0,
    "blocks": 3,
    "heads": 1,
    "hidden": 32,
    "activation": "relu",
}


def validate_train_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise SchemaViolationError("train config must be a JSON object")
    allowed = {"epochs"} | set(TRAIN_DEFAULTS)
    unknown = set(cfg) - allowed
    if unknown:
        raise SchemaViolationError(f"unknown train config keys: {sorted(unknown)}")
    if "epochs" not in cfg or isinstance(cfg["epochs"], bool) or not isinstance(cfg["epochs"], int):
        raise SchemaViolationError("train config needs an integer 'epochs'")
    out = dict(TRAIN_DEFAULTS)
    out["epochs"] = cfg["epochs"]
    for key, val in cfg.items():
        if key == "epochs":
            continue
        default = TRAIN_DEFAULTS[key]
        if isinstance(default, bool) or isinstance(val, bool):
            raise SchemaViolationError(f"bad type for {key!r}")
        if isinstance(default, int) and not isinstance(val, int):
            raise SchemaViolationError(f"{key!r} must be an integer")
        if isinstance(default, float) and not isinstance(val, (int, float)):
            raise SchemaViolationError(f"{key!r} must be a number")
        if isinstance(default, str) and not isinstance(val, str):
            raise SchemaViolationError(f"{key!r} must be a string")
        out[key] = val
    return out


def model_config_for(manifest: dict, train_cfg: dict) -> ModelConfig:
    task = manifest["task"]
    if task == "qst":
        model_task, token_dim = "qst", 2
    else:
        model_task = "dfe"
        token_dim = qsl_data.MASK_WIDTH[manifest["feature_mask"]]
    return ModelConfig(
        task=model_task,
        n_qubits=manifest["n_qubits"],
        token_dim=token_dim,
        hidden=train_cfg["hidden"],
        blocks=train_cfg["blocks"],
        heads=train_cfg["heads"],
        activation=train_cfg["activation"],
    )


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def compute_summary(model, ds: qsl_data.Dataset, epochs_completed: int) -> dict:
    """Test metrics plus faithfulness, all recomputable from checkpoint + data."""
    summary = {"task": ds.task, "epochs_completed": epochs_completed}
    if not ds.test:
        return summary
    if ds.task == "qst":
        _, agg = evaluate_qst(model, ds.test)
    else:
        _, agg = evaluate_dfe(model, ds.test)
    summary.update(agg)
    _, report = faith_report(model, ds.test)
    summary["faithful_fraction"] = report["faithful_fraction"]
    summary["fallback_count"] = report["fallback_count"]
    summary["indeterminate_count"] = report["indeterminate_count"]
    return summary


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def train_run(data_dir, config: dict, out_dir, resume: bool = False) -> dict:
    """Train a model on a dataset directory; returns the run summary."""
    ds = qsl_data.load(data_dir)
    tcfg_dict = validate_train_config(config)
    out = Path(out_dir)
    summary_path = out / "summary.json"
    metrics_path = out / "metrics.csv"
    ckpt_path = out / "checkpoint.qslw"
    if summary_path.exists():
        if resume:
            print(f"run {out} already complete; nothing to do")
            return json.loads(summary_path.read_text())
        raise SchemaViolationError(f"{out} already holds a completed run (use --resume)")

    tcfg = TrainConfig(
        epochs=tcfg_dict["epochs"],
        batch_size=tcfg_dict["batch_size"],
        lr=tcfg_dict["lr"],
        beta1=tcfg_dict["beta1"],
        beta2=tcfg_dict["beta2"],
        weight_decay=tcfg_dict["weight_decay"],
        seed=tcfg_dict["seed"],
    )
    start_epoch = 0
    state = None
    if resume and ckpt_path.exists():
        model, saved_cfg, state, start_epoch = load_checkpoint(ckpt_path)
        # Epoch shuffles are keyed per epoch, so extending the epoch budget is
        # well-defined; every other hyperparameter must match the checkpoint.
        saved = saved_cfg.to_dict()
        wanted = tcfg.to_dict()
        saved.pop("epochs")
        wanted.pop("epochs")
        if saved != wanted:
            raise SchemaViolationError("resume config differs from the checkpointed one")
        rows = max(0, len(metrics_path.read_text().splitlines()) - 1)
        if rows != start_epoch:
            raise SchemaViolationError("metrics rows do not match the checkpoint epoch")
        print(f"resuming {out} from epoch {start_epoch}")
    else:
        out.mkdir(parents=True, exist_ok=True)
        model = build_model(model_config_for(ds.manifest, tcfg_dict), tcfg.seed)
        _write_json(out / "config.json", tcfg_dict)
        with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(METRIC_COLUMNS)

    if ds.task == "qst":
        x_train, y_train = qsl_data.qst_arrays(ds.train)
        x_test, y_test = qsl_data.qst_arrays(ds.test) if ds.test else (None, None)
    else:
        x_train, y_train = qsl_data.dfe_arrays(ds.train)
        x_test, y_test = qsl_data.dfe_arrays(ds.test) if ds.test else (None, None)

    started = time.monotonic()
    fh = open(metrics_path, "a", newline="", encoding="utf-8")
    writer = csv.writer(fh)

    def on_epoch(epoch, row, mdl, st):
        extra = {}
        if ds.test:
            if ds.task == "qst":
                _, agg = evaluate_qst(mdl, ds.test)
                extra = {"test_fq_mean": agg["test_fq_mean"], "test_e1_mean": agg["test_e1_mean"]}
            else:
                extra = {"test_e2_mean": row["test_loss"]}
        writer.writerow(
            [
                epoch,
                _fmt(row.get("train_loss")),
                _fmt(row.get("test_loss")),
                _fmt(extra.get("test_fq_mean")),
                _fmt(extra.get("test_e1_mean")),
                _fmt(extra.get("test_e2_mean")),
            ]
        )
        fh.flush()
        save_checkpoint(ckpt_path, mdl, tcfg, st, epoch)
        return extra

    try:
        train(
            model,
            x_train,
            y_train,
            tcfg,
            test_x=x_test,
            test_y=y_test,
            state=state,
            start_epoch=start_epoch,
            epoch_callback=on_epoch,
        )
    finally:
        fh.close()
    if not ckpt_path.exists():  # zero-epoch runs still need an auditable checkpoint
        save_checkpoint(ckpt_path, model, tcfg, state or AdamWState(model.params), start_epoch)
    summary = compute_summary(model, ds, tcfg.epochs)
    _write_json(summary_path, summary)
    _write_json(out / "timings.json", {"wall_clock_seconds": time.monotonic() - started})
    return summary


def eval_run(run_dir, data_dir, atol: float = 1e-9) -> dict:
    """Recompute summary.json from checkpoint + dataset and audit the stored one."""
    run = Path(run_dir)
    model, _, _, epoch = load_checkpoint(run / "checkpoint.qslw")
    ds = qsl_data.load(data_dir)
    fresh = compute_summary(model, ds, epoch)
    stored = json.loads((run / "summary.json").read_text())
    mismatches = []
    for key, val in fresh.items():
        ref = stored.get(key)
        if isinstance(val, float) and isinstance(ref, (int, float)):
            if not (val != val and ref != ref) and abs(val - ref) > atol:
                mismatches.append(key)
        elif ref != val:
            mismatches.append(key)
    fresh["audit_ok"] = not mismatches
    fresh["audit_mismatches"] = mismatches
    return fresh


def faith_run(run_dir, data_dir, k_split: int, delta: float, out_path=None) -> dict:
    run = Path(run_dir)
    model, _, _, _ = load_checkpoint(run / "checkpoint.qslw")
    ds = qsl_data.load(data_dir)
    _, report = faith_report(model, ds.test, k_split=k_split, delta=delta)
    if out_path is None:
        out_path = run / "faith.json"
    _write_json(Path(out_path), report)
    return report


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a dataset from a JSON config")
    g.add_argument("--task", choices=["qst", "dfe", "stateprep"], help="must match the config")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--seed", type=int, default=None)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", action="store_true")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--workers", type=int, default=1)  # training is single-instance

    e = sub.add_parser("eval", help="recompute and audit a run summary")
    e.add_argument("--run", required=True)
    e.add_argument("--data", required=True)

    f = sub.add_parser("faith", help="faithfulness report for a run's test split")
    f.add_argument("--run", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--k-split", type=int, default=5)
    f.add_argument("--delta", type=float, default=0.05)
    f.add_argument("--out", default=None)

    o = sub.add_parser("oracle", help="run a named self-check suite")
    o.add_argument("--check", required=True)
    return parser


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_gen_data(args) -> int:
    cfg = _load_json(args.config)
    if args.task and cfg.get("task") != args.task:
        print(f"--task {args.task} does not match config task {cfg.get('task')!r}",
              file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    ds = qsl_data.generate(cfg, out_dir=args.out, workers=args.workers)
    print(
        f"wrote {len(ds.train)} train + {len(ds.test)} test examples "
        f"({ds.task}, n={ds.manifest['n_qubits']}, M={ds.manifest['m_shots']}) to {args.out}"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = _load_json(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    summary = train_run(args.data, cfg, args.out, resume=args.resume)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    result = eval_run(args.run, args.data)
    print(json.dumps(result, sort_keys=True))
    return 0 if result["audit_ok"] else 1


def _cmd_faith(args) -> int:
    report = faith_run(args.run, args.data, args.k_split, args.delta, args.out)
    brief = {k: v for k, v in report.items() if k != "verdicts"}
    print(json.dumps(brief, sort_keys=True))
    return 0


def _cmd_oracle(args) -> int:
    if args.check not in CHECKS:
        print(f"unknown check {args.check!r}; valid names: {sorted(CHECKS)}", file=sys.stderr)
        return 2
    result = run_check(args.check)
    print(json.dumps(result, sort_keys=True))
    return 0 if result["passed"] else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "gen-data": _cmd_gen_data,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "faith": _cmd_faith,
        "oracle": _cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except (SchemaViolationError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
