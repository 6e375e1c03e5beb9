"""Command-line entry point: gen | train | eval | serve.

Option precedence is flags > config file > built-in defaults; every run
echoes the fully resolved configuration so it can be replayed.  Progress
goes to stderr, machine-readable reports go to files, and exit codes are
stable: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import signal
import sys

import numpy as np

from .artifact import (
    artifact_from_training,
    build_meta,
    load_artifact,
    save_artifact,
    _atomic_write,
)
from .autoencoder import build_ae, joint_train, pretrain_ae
from .clustering import kmeans_assign, pca_transform
from .data import (
    ClassTemplate,
    Dataset,
    SyntheticProfile,
    default_profile,
    load_dataset,
    normalize_dataset,
    save_dataset,
    synth_generate,
)
from .errors import SpecsenseError
from .metrics import build_metrics_report
from .nn import complexity_report
from .service import create_service
from .ssdc import TrainConfig, embed_batch, train_ssdc


class UsageError(Exception):
    pass


GEN_DEFAULTS = {"classes": 3, "n": 1000, "seed": 0, "out": "dataset.csv", "profile": None}
TRAIN_DEFAULTS = {
    "epochs": None,  # resolved per arch: ssdc 250, joint phase 50
    "pretrain_epochs": 200,
    "k": 10,
    "batch_size": 256,
    "lr": 1e-3,
    "weight_decay": 1e-5,
    "alpha": 1.0,
    "beta": 1.0,
    "seed": 0,
    "out": ".",
}
EVAL_DEFAULTS = {"out": "metrics.json", "seed": 0}
SERVE_DEFAULTS = {"port": 8080, "host": "127.0.0.1", "cors": True}


def _progress(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load_config_file(path: str | None, allowed: set[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(values, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = set(values) - allowed
    if unknown:
        raise UsageError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return values


def _effective(args, defaults: dict) -> dict:
    """Resolve flags > config file > defaults for the keys in defaults."""
    file_vals = _load_config_file(getattr(args, "config", None), set(defaults))
    out = {}
    for key, builtin in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_vals:
            out[key] = file_vals[key]
        else:
            out[key] = builtin
    return out


def _profile_from_file(path: str, seed: int) -> SyntheticProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        templates = tuple(
            ClassTemplate(
                name=t["name"],
                kind=t["kind"],
                center=tuple(t["center"]),
                width=tuple(t["width"]),
                power_db=tuple(t["power_db"]),
            )
            for t in doc["templates"]
        )
        return SyntheticProfile(
            templates=templates,
            noise_floor_db=float(doc.get("noise_floor_db", -110.0)),
            noise_sigma_db=float(doc.get("noise_sigma_db", 2.0)),
            seed=int(doc.get("seed", seed)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SpecsenseError(f"invalid profile file {path}: {exc}") from None


def cmd_gen(args) -> int:
    cfg = _effective(args, GEN_DEFAULTS)
    if cfg["profile"]:
        profile = _profile_from_file(cfg["profile"], cfg["seed"])
        if args.seed is not None:
            profile = dataclasses.replace(profile, seed=args.seed)
    else:
        profile = default_profile(cfg["classes"], cfg["seed"])
    dataset = synth_generate(profile, cfg["n"])
    save_dataset(dataset, cfg["out"])
    _progress(args, f"config: {json.dumps(cfg)}")
    _progress(args, f"wrote {len(dataset)} sweeps ({len(profile.templates)} classes) to {cfg['out']}")
    return 0


def _train_config(cfg: dict, epochs: int) -> TrainConfig:
    from .nn import AdamConfig

    return TrainConfig(
        epochs=epochs,
        batch_size=cfg["batch_size"],
        k=cfg["k"],
        adam=AdamConfig(lr=cfg["lr"], weight_decay=cfg["weight_decay"]),
        seed=cfg["seed"],
    )


def cmd_train(args) -> int:
    cfg = _effective(args, TRAIN_DEFAULTS)
    dataset = normalize_dataset(load_dataset(args.data))
    arch = args.arch
    if arch == "ssdc":
        epochs = cfg["epochs"] if cfg["epochs"] is not None else 250
        tc = _train_config(cfg, epochs)
        _progress(args, f"training ssdc for {epochs} rounds on {len(dataset)} sweeps")
        report = train_ssdc(dataset, tc)
        phase_summary = {
            "rounds": [
                {
                    "round": r.round,
                    "inertia": r.inertia,
                    "ce_loss": r.ce_loss,
                    "cluster_sizes": r.cluster_sizes,
                    "elapsed_s": r.elapsed_s,
                }
                for r in report.rounds
            ]
        }
        meta_extra = {"variant": "ssdc", "surrogate": False}
    else:
        joint_epochs = cfg["epochs"] if cfg["epochs"] is not None else 50
        pre_epochs = cfg["pretrain_epochs"]
        tc = _train_config(cfg, max(1, joint_epochs))
        model = build_ae(seed=cfg["seed"], k=cfg["k"])
        _progress(args, f"pretraining autoencoder for {pre_epochs} epochs on {len(dataset)} sweeps")
        model, curve = pretrain_ae(model, dataset, pre_epochs, tc)
        _progress(args, f"joint training ({arch}) for {joint_epochs} epochs")
        report = joint_train(
            model,
            dataset,
            arch,
            joint_epochs,
            tc,
            alpha=cfg["alpha"],
            beta=cfg["beta"],
            pretrain_curve=curve,
        )
        phase_summary = {
            "pretrain_epochs": pre_epochs,
            "joint_epochs": joint_epochs,
            "pretrain_curve": curve,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "recon_loss": e.recon_loss,
                    "cluster_loss": e.cluster_loss,
                    "total_loss": e.total_loss,
                    "elapsed_s": e.elapsed_s,
                }
                for e in report.epochs
            ],
        }
        meta_extra = {"variant": arch, "surrogate": report.surrogate}

    os.makedirs(cfg["out"], exist_ok=True)
    artifact_path = os.path.join(cfg["out"], "artifact.json")
    report_path = os.path.join(cfg["out"], "report.json")
    meta = build_meta(cfg["seed"], tc.epochs, dataset, extra=meta_extra)
    artifact = artifact_from_training(report, dataset, meta=meta)
    save_artifact(artifact, artifact_path)

    params, gflops = complexity_report(report.model)
    run_report = {
        "arch": arch,
        "config": {**cfg, "data": args.data},
        "param_count": params,
        "gflops": gflops,
        "final_inertia": report.final_inertia,
        "final_cluster_sizes": report.final_cluster_sizes,
        "meta": meta,
        **phase_summary,
    }
    if dataset.labeled:
        emb = embed_batch(report.model, dataset).astype(np.float64)
        points = pca_transform(report.cluster_model.pca, emb)
        notes = ["cluster loss is a surrogate"] if meta_extra["surrogate"] else None
        metrics = build_metrics_report(
            points,
            report.final_labels,
            true_labels=dataset.labels,
            class_names=dataset.class_names,
            k=tc.k,
            seed=cfg["seed"],
            notes=notes,
        )
        run_report["metrics"] = metrics.to_dict()
    _atomic_write(report_path, json.dumps(run_report, indent=2))
    _progress(args, f"artifact: {artifact_path}")
    _progress(args, f"report: {report_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _effective(args, EVAL_DEFAULTS)
    artifact = load_artifact(args.artifact)
    raw = load_dataset(args.data)
    dataset = normalize_dataset(raw, stats=artifact.norm_stats)
    emb = embed_batch(artifact.model, dataset).astype(np.float64)
    points = pca_transform(artifact.cluster_model.pca, emb)
    labels, d2 = kmeans_assign(artifact.cluster_model, points)
    notes = []
    if artifact.meta.get("surrogate"):
        notes.append("cluster loss is a surrogate")
    metrics = build_metrics_report(
        points,
        labels,
        true_labels=dataset.labels if dataset.labeled else None,
        class_names=dataset.class_names if dataset.labeled else None,
        k=artifact.k,
        seed=cfg["seed"],
        notes=notes or None,
    )
    doc = {
        "artifact": args.artifact,
        "data": args.data,
        "config": cfg,
        "n": len(dataset),
        "inertia": float(d2.sum()),
        "metrics": metrics.to_dict(),
    }
    _atomic_write(cfg["out"], json.dumps(doc, indent=2))
    _progress(args, f"metrics report: {cfg['out']}")
    return 0


def cmd_serve(args) -> int:
    cfg = _effective(args, SERVE_DEFAULTS)
    service = create_service(
        args.artifact,
        args.labelmap,
        port=cfg["port"],
        host=cfg["host"],
        cors=cfg["cors"],
        quiet=args.quiet,
    )

    def _stop(signum, frame):
        # shutdown() blocks until serve_forever returns, and this handler
        # runs on the thread inside serve_forever, so hand it off
        import threading

        threading.Thread(target=service.server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    _progress(args, f"listening on http://{cfg['host']}:{service.port}/v1")
    try:
        service.serve_forever()
    finally:
        service.server.server_close()
    _progress(args, "shut down cleanly")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsense",
        description="Spectrum-sweep clustering: generate, train, evaluate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON file of option defaults")
        p.add_argument("--quiet", action="store_true")

    g = sub.add_parser("gen", help="generate a synthetic sweep dataset")
    common(g)
    g.add_argument("--classes", type=int, default=None)
    g.add_argument("--n", type=int, default=None, help="sweeps per class")
    g.add_argument("--out", default=None)
    g.add_argument("--profile", default=None, help="JSON profile overriding the built-in templates")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train one architecture and write an artifact")
    common(t)
    t.add_argument("--arch", required=True, choices=["ssdc", "aeml", "dcec"])
    t.add_argument("--data", required=True)
    t.add_argument("--out", default=None, help="output directory")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int, default=None)
    t.add_argument("--k", type=int, default=None)
    t.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    t.add_argument("--alpha", type=float, default=None)
    t.add_argument("--beta", type=float, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score an artifact against a dataset")
    common(e)
    e.add_argument("--artifact", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("serve", help="serve a trained artifact over HTTP")
    common(s)
    s.add_argument("--artifact", required=True)
    s.add_argument("--labelmap", required=True)
    s.add_argument("--port", type=int, default=None)
    s.add_argument("--host", default=None)
    cors = s.add_mutually_exclusive_group()
    cors.add_argument("--cors", dest="cors", action="store_true", default=None)
    cors.add_argument("--no-cors", dest="cors", action="store_false")
    s.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpecsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
