"""dtpaudit command line.

Every command reads a JSON config and writes its outputs to --out. Exit codes:
0 success, 1 operational or usage error, 2 DTP-1 policy violation.

Config layout::

    {
      "seed": 7,
      "dataset": {"csv": "train.csv", "schema": "schema.json" | "adult",
                  "ignore_columns": [], "training_size": 250}
                 | {"synth": {"n_records": 500, "n_features": 30, "n_classes": 4}},
      "classifier": {"algorithm": "naive-bayes", "laplace": false},
      "targets": [0, 3, 9] | "all",
      "level": "binned",
      "attack": {"kind": "distance", "shadows": 5},
      "protocol": {"iterations": 20, "pdtp_iterations": 10, "targets": 100,
                   "attacks": ["distance"]},
      "removals": 3
    }
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .attacks import ATTACKS, AttackNetSpec, build_shadows, distance_attack, frequency_attack
from .attacks import untargeted_attack_decide, untargeted_attack_train
from .classifiers import ClassifierSpec, train
from .data import (
    ADULT_IGNORED_COLUMNS,
    Dataset,
    FeatureSchema,
    adult_schema,
    binary_schema,
    load_csv,
    sample_subset,
    save_csv,
    split_half,
)
from .harness import ProtocolConfig, reduce_dtp, run_protocol
from .metrics import (
    dtp_from_stability,
    lipschitz_dtp,
    measure_dtp_exhaustive,
    measure_pdtp,
    stability_bound,
)
from .seeding import derive_seed
from .synth import synth_purchase

log = logging.getLogger("dtpaudit")

DTP1_THRESHOLD = 1.0
EXIT_OK, EXIT_ERROR, EXIT_POLICY = 0, 1, 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; 2 is reserved for policy violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------- config


def load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON: {exc}") from exc
        base = Path(args.config).resolve().parent
        ds = cfg.get("dataset", {})
        for key in ("csv", "schema"):
            if key in ds and ds[key] != "adult" and not Path(ds[key]).is_absolute():
                ds[key] = str(base / ds[key])
    if args.seed is not None:
        cfg["seed"] = args.seed
    if "seed" not in cfg:
        raise CliError("a master seed is required (config 'seed' or --seed)")
    if args.workers is not None:
        cfg.setdefault("protocol", {})["workers"] = args.workers
    return cfg


def load_candidates(cfg: dict) -> Dataset:
    ds = cfg.get("dataset")
    if not ds:
        raise CliError("config has no 'dataset' section")
    if "synth" in ds:
        return synth_purchase(seed=derive_seed(cfg["seed"], "synth"), **ds["synth"])
    if "csv" not in ds:
        raise CliError("dataset needs 'csv' or 'synth'")
    schema_ref = ds.get("schema")
    if schema_ref is None:
        raise CliError("csv dataset needs a 'schema' (path or \"adult\")")
    ignore = ds.get("ignore_columns")
    if schema_ref == "adult":
        schema = adult_schema()
        ignore = ADULT_IGNORED_COLUMNS if ignore is None else ignore
    else:
        schema = FeatureSchema.load(schema_ref)
    return load_csv(ds["csv"], schema, ignore or ())


def training_set(cfg: dict, candidates: Dataset) -> Dataset:
    size = cfg.get("dataset", {}).get("training_size")
    if size is None:
        return candidates
    return sample_subset(candidates, int(size), derive_seed(cfg["seed"], "training-set"))


def classifier_spec(cfg: dict) -> ClassifierSpec:
    if "classifier" not in cfg:
        raise CliError("config has no 'classifier' section")
    spec = ClassifierSpec.from_dict(cfg["classifier"])
    if "seed" not in cfg["classifier"]:
        spec = spec.with_seed(derive_seed(cfg["seed"], "classifier"))
    return spec


def target_ids(cfg: dict, args, t_set: Dataset) -> list[int]:
    raw = args.targets if getattr(args, "targets", None) is not None else cfg.get("targets", "all")
    if raw == "all" or raw == ["all"]:
        return t_set.ids.tolist()
    ids = [int(t) for t in raw]
    missing = [t for t in ids if not t_set.has_id(t)]
    if missing:
        raise CliError(f"target ids not in the dataset: {missing}")
    return ids


def out_dir(args, cfg: dict) -> Path:
    d = Path(args.out or cfg.get("out", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(_json_safe(r), sort_keys=True) + "\n")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _policy(args, epsilons) -> int:
    worst = max(epsilons, default=0.0)
    if args.enforce_dtp1 and worst > DTP1_THRESHOLD:
        print(f"DTP-1 violated: max epsilon {worst:.4f} > {DTP1_THRESHOLD}", file=sys.stderr)
        return EXIT_POLICY
    return EXIT_OK


# --------------------------------------------------------------- commands


def cmd_pdtp(args, cfg) -> int:
    t_set = training_set(cfg, load_candidates(cfg))
    spec = classifier_spec(cfg)
    level = cfg.get("level", "binned")
    full = train(spec, t_set)
    rows = [measure_pdtp(spec, t_set, t, level, full=full) for t in target_ids(cfg, args, t_set)]
    out = out_dir(args, cfg)
    write_jsonl(out / "pdtp.jsonl", [r.to_dict() for r in rows])
    with open(out / "pdtp.csv", "w", encoding="utf-8") as fh:
        fh.write("record_id,epsilon,ratio\n")
        for r in rows:
            fh.write(f"{r.record_id},{r.epsilon!r},{r.ratio!r}\n")
    print(f"{len(rows)} PDTP measurements, max epsilon {max(r.epsilon for r in rows):.4f}")
    return _policy(args, [r.epsilon for r in rows])


def cmd_dtp(args, cfg) -> int:
    t_set = training_set(cfg, load_candidates(cfg))
    spec = classifier_spec(cfg)
    level = cfg.get("level", "binned")
    rows = [measure_dtp_exhaustive(spec, t_set, t, level) for t in target_ids(cfg, args, t_set)]
    write_jsonl(out_dir(args, cfg) / "dtp.jsonl", [r.to_dict() for r in rows])
    print(f"{len(rows)} exhaustive DTP measurements, max epsilon {max(r.epsilon for r in rows):.4f}")
    return _policy(args, [r.epsilon for r in rows])


def cmd_stability(args, cfg) -> int:
    t_set = training_set(cfg, load_candidates(cfg))
    spec = classifier_spec(cfg)
    out = out_dir(args, cfg)
    if args.lipschitz is not None:
        m = lipschitz_dtp(spec, t_set, args.lipschitz)
        write_json(out / "stability.json", {"method": "lipschitz-bound", "L": args.lipschitz, "dtp": m.to_dict()})
        print(f"Lipschitz DTP bound: epsilon {m.epsilon:.4f}")
        return _policy(args, [m.epsilon])
    bound = stability_bound(spec, t_set)
    full = train(spec, t_set)
    level = cfg.get("level", "binned")
    dtps = [dtp_from_stability(measure_pdtp(spec, t_set, t, level, full=full), bound)
            for t in target_ids(cfg, args, t_set)]
    write_json(out / "stability.json", {"method": "stability-bound", "bound": bound.to_dict(),
                                        "dtp": [d.to_dict() for d in dtps]})
    print(f"delta = {bound.delta:.6f} {bound.parameters}; max DTP epsilon {max(d.epsilon for d in dtps):.4f}")
    return _policy(args, [d.epsilon for d in dtps])


def cmd_attack(args, cfg) -> int:
    acfg = dict(cfg.get("attack", {}))
    kind = args.kind or acfg.get("kind")
    if kind not in ATTACKS:
        raise CliError(f"unknown attack kind {kind!r}; choose from {', '.join(ATTACKS)}")
    candidates = load_candidates(cfg)
    spec = classifier_spec(cfg)
    seed = cfg["seed"]
    # target model trained on one random half of the candidate set
    T, _ = split_half(candidates, derive_seed(seed, "attack-split"))
    half = len(T)
    model = train(spec, T)
    ids = target_ids(cfg, args, candidates)
    lines = []
    if kind == "untargeted":
        ens = build_shadows(candidates, spec, "untargeted", acfg.get("shadows", 20), half,
                            derive_seed(seed, "untargeted"))
        net = AttackNetSpec(**{**acfg.get("net", {}), "seed": derive_seed(seed, "attack-net")})
        clf = untargeted_attack_train(ens, candidates, net)
    for t in ids:
        rec = candidates.record_by_id(t)
        q = model.predict(rec.x)
        if kind == "untargeted":
            v = untargeted_attack_decide(clf, rec, q, t)
        else:
            ens = build_shadows(candidates, spec, "paired", acfg.get("shadows", 5), half,
                                derive_seed(seed, "paired", t), t)
            v = (distance_attack if kind == "distance" else frequency_attack)(ens, q)
        lines.append(dict(v.to_dict(), truth="H1_member" if T.has_id(t) else "H0_nonmember"))
    write_jsonl(out_dir(args, cfg) / "verdicts.jsonl", lines)
    correct = sum(line["decision"] == line["truth"] for line in lines)
    print(f"{len(lines)} verdicts, {correct} correct")
    return EXIT_OK


def cmd_experiment(args, cfg) -> int:
    candidates = load_candidates(cfg)
    spec = classifier_spec(cfg)
    pcfg = ProtocolConfig.from_dict({**cfg.get("protocol", {}), "seed": cfg["seed"]}, classifier=spec)
    report = run_protocol(candidates, pcfg)
    out = out_dir(args, cfg)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "per_target.csv").write_text(report.to_csv(), encoding="utf-8")
    table = report.summary_table()
    (out / "summary.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_reduce(args, cfg) -> int:
    t_set = training_set(cfg, load_candidates(cfg))
    removals = args.removals if args.removals is not None else cfg.get("removals")
    if removals is None:
        raise CliError("number of removals missing (--removals or config 'removals')")
    res = reduce_dtp(t_set, classifier_spec(cfg), int(removals), cfg.get("level", "binned"))
    (out_dir(args, cfg) / "reduction.csv").write_text(res.to_csv(), encoding="utf-8")
    print(f"initial max PDTP {res.initial_max:.4f}; {len(res.trajectory)} removals")
    return EXIT_OK


def cmd_synth(args, cfg) -> int:
    params = cfg.get("dataset", {}).get("synth")
    if params is None:
        raise CliError("config needs dataset.synth parameters")
    d = load_candidates(cfg)
    out = out_dir(args, cfg)
    save_csv(d, out / "synth.csv")
    binary_schema(params["n_features"], params["n_classes"]).save(out / "synth_schema.json")
    print(f"wrote {len(d)} records to {out / 'synth.csv'}")
    return EXIT_OK


COMMANDS = {
    "pdtp": (cmd_pdtp, "per-record PDTP by leave-one-out retraining"),
    "dtp": (cmd_dtp, "exhaustive DTP over the whole feature space"),
    "attack": (cmd_attack, "run one membership attack against a trained model"),
    "experiment": (cmd_experiment, "attack/PDTP correlation protocol"),
    "stability": (cmd_stability, "DTP from a training-stability or Lipschitz bound"),
    "reduce": (cmd_reduce, "greedily drop high-PDTP records"),
    "synth": (cmd_synth, "generate a synthetic purchase-like dataset"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (default: config 'out' or .)")
    common.add_argument("--workers", type=int, help="worker processes; results do not depend on it")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="dtpaudit", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name in ("pdtp", "dtp", "attack", "stability"):
            sp.add_argument("--targets", nargs="+", help="record ids or 'all'")
        if name in ("pdtp", "dtp", "stability"):
            sp.add_argument("--enforce-dtp1", action="store_true",
                            help="exit 2 if any epsilon exceeds 1")
        if name == "stability":
            sp.add_argument("--lipschitz", type=float, metavar="L",
                            help="use the Lipschitz bound with constant L")
        if name == "attack":
            sp.add_argument("--kind", help=f"one of {', '.join(ATTACKS)}")
        if name == "reduce":
            sp.add_argument("--removals", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "targets", None) is not None and args.targets != ["all"]:
        try:
            args.targets = [int(t) for t in args.targets]
        except ValueError:
            print("dtpaudit: error: --targets takes integer ids or 'all'", file=sys.stderr)
            return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command][0](args, cfg)
    except (CliError, ValueError, KeyError, OSError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"dtpaudit {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
