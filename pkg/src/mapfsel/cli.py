"""Command-line driver: sweep, featurize, label, train, eval, report, ablate.

Exit codes: 0 success, 2 usage or configuration error, 3 data-contract error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import shutil
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np
from filelock import FileLock, Timeout

from .config import (DataContractError, PipelineConfig, UsageError, config_text, load_config,
                     split_of)
from .features import (FeatureTensor, RescaleError, RescaleSpec, apply_stats,
                       assemble, expand_group_specs, fit_stats, read_tensor, rescale, write_manifest,
                       write_tensor)
from .grid import Grid, MapParseError, Scenario, ScenarioError, load_map, parse_scenario
from .harness import SweepPlan, discover_maps, export_csv, read_records, run_sweep
from .labeling import (LabeledInstance, Objective, compute_vbs_sbs, cost_bound, group_records,
                       label_dataset, read_labels, write_labels)
from .metrics import (ablation_table, accuracy, frequency_svg, gap_report, write_ablation,
                      write_frequency_csv, write_metric_csv)
from .selector import SelectorModel, TrainConfig, TrainSample, pool_features, predict_proba, train

log = logging.getLogger("mapfsel")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
Key = tuple[str, str, int]


def objective_token(obj: Objective) -> str:
    return f"{obj.family}_{obj.value:g}"


def task_name(obj: Objective, loss: str) -> str:
    return f"{obj.task_prefix}-{loss.upper()}"


class Layout:
    """Where every artifact lives inside the output directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.records = self.root / "records.jsonl"
        self.checkpoint = self.root / "records.checkpoint.json"
        self.records_csv = self.root / "records.csv"
        self.sweep_stamp = self.root / "sweep.json"
        self.labels = self.root / "labels"
        self.reports = self.root / "reports"

    def features(self, spec: str) -> Path:
        return self.root / "features" / spec

    def label_file(self, obj: Objective) -> Path:
        return self.labels / f"labels_{objective_token(obj)}.csv"

    def model(self, spec: str, task: str) -> Path:
        return self.root / "models" / spec / f"{task}.json"

    def eval_report(self, spec: str, obj: Objective, loss: str) -> Path:
        return self.reports / spec / f"eval_{objective_token(obj)}_{loss.upper()}.csv"


# ---------------------------------------------------------------------------
# shared loading


class ScenarioSource:
    """Lazily loads maps and scenario files referenced by records."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._grids: dict[str, Grid] = {}
        self._texts: dict[str, str] = {}

    def grid(self, map_name: str) -> Grid:
        if map_name not in self._grids:
            path = Path(self.cfg.maps_dir) / f"{map_name}.map"
            try:
                self._grids[map_name] = load_map(path)
            except FileNotFoundError:
                raise DataContractError(f"map {map_name!r} referenced by the record log is missing: {path}") from None
            except MapParseError as exc:
                raise DataContractError(f"{path}: {exc}") from None
        return self._grids[map_name]

    def scenario(self, key: Key) -> Scenario:
        map_name, scenario_id, n = key
        if scenario_id not in self._texts:
            path = Path(self.cfg.scenarios_dir) / f"{scenario_id}.scen"
            try:
                self._texts[scenario_id] = path.read_text()
            except FileNotFoundError:
                raise DataContractError(f"scenario file {path} referenced by the record log is missing") from None
        try:
            return parse_scenario(self._texts[scenario_id], self.grid(map_name), n, map_name, scenario_id)
        except ScenarioError as exc:
            raise DataContractError(f"{scenario_id} with {n} agents: {exc}") from None


def _load_records(lay: Layout):
    if not lay.records.exists():
        raise UsageError(f"no record log at {lay.records}; run 'mapfsel sweep' first")
    records = read_records(lay.records)
    if not records:
        raise UsageError(f"record log {lay.records} is empty; run 'mapfsel sweep' first")
    return records


def _instances(records) -> list[Key]:
    return sorted({r.instance for r in records})


def _split(cfg: PipelineConfig, key: Key) -> str:
    return split_of(key[0], key[1], cfg.split_seed, cfg.fractions)


def _read_json(path: Path) -> dict | None:
    try:
        return json.loads(path.read_text())
    except (FileNotFoundError, ValueError):
        return None


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: PipelineConfig, lay: Layout, force: bool = False) -> None:
    for d in (cfg.maps_dir, cfg.scenarios_dir):
        if not Path(d).is_dir():
            raise UsageError(f"directory not found: {d}")
    entries = discover_maps(cfg.maps_dir, cfg.scenarios_dir, cfg.maps, cfg.scenarios_per_map)
    if not entries:
        raise UsageError(f"no <map>-*.scen files in {cfg.scenarios_dir} match a map in {cfg.maps_dir}")
    fp = cfg.fingerprint("maps_dir", "scenarios_dir", "maps", "scenarios_per_map", "portfolio", "time_limit",
                         "agent_start", "agent_step", "stop_count", "max_agents", "budget_mode",
                         "expansion_budget", "seed")
    stamp = _read_json(lay.sweep_stamp)
    if force:
        for p in (lay.records, lay.checkpoint, lay.records_csv, lay.sweep_stamp):
            p.unlink(missing_ok=True)
    elif stamp is not None and stamp.get("fingerprint") != fp:
        raise UsageError(f"{lay.root} holds a sweep with different settings; rerun with --force to replace it")
    elif stamp is not None and stamp.get("complete") and lay.records.exists():
        print(f"sweep: {lay.records} is up to date")
        return
    lay.sweep_stamp.write_text(json.dumps({"fingerprint": fp, "complete": False}) + "\n")

    plan = SweepPlan(entries, time_limit=cfg.time_limit, agent_start=cfg.agent_start,
                     agent_step=cfg.agent_step, stop_count=cfg.stop_count, seed=cfg.seed,
                     budget_mode=cfg.budget_mode, expansion_budget=cfg.expansion_budget,
                     max_agents=cfg.max_agents)
    specs = cfg.portfolio_specs()
    print(f"sweep: {len(entries)} map(s), portfolio {', '.join(s.id for s in specs)}, "
          f"{cfg.budget_mode} budget, {cfg.workers} worker(s)")
    for s in run_sweep(plan, specs, lay.records, lay.checkpoint, cfg.workers):
        solved = " ".join(f"{k}={v}" for k, v in s.per_solver.items())
        print(f"  {s.map_name:<24} agents={s.agents:<4} scenarios={s.scenarios:<3} {solved}"
              + ("  [stop]" if s.stopped else ""))
    records = read_records(lay.records)
    export_csv(records, lay.records_csv)
    lay.sweep_stamp.write_text(json.dumps({"fingerprint": fp, "complete": True}) + "\n")
    print(f"sweep: {len(records)} records in {lay.records}")


# ---------------------------------------------------------------------------
# featurize


def _check_fits(cfg: PipelineConfig, source: ScenarioSource, instances: Sequence[Key], spec: RescaleSpec) -> None:
    if not spec.pad_channels:
        return
    for map_name in sorted({k[0] for k in instances}):
        h, w = source.grid(map_name).shape
        if h > spec.target or w > spec.target:
            raise DataContractError(
                f"map {map_name} is {h}x{w}, larger than the rescale target {spec.target} "
                f"while spec {spec.methods} center-pads channels {[c + 1 for c in spec.pad_channels]}")


def _tensor_name(key: Key) -> str:
    return f"{key[0]}__{key[1]}__{key[2]}.bin"


def cmd_featurize(cfg: PipelineConfig, lay: Layout, force: bool = False, spec_text: str | None = None,
                  raw_cache: dict[Key, FeatureTensor] | None = None) -> Path:
    spec = cfg.rescale_spec(spec_text)
    records = _load_records(lay)
    instances = _instances(records)
    out = lay.features(spec.methods)
    manifest_path = out / "manifest.json"
    fp = cfg.fingerprint("maps_dir", "scenarios_dir", "target", "split_seed", "fractions", "stats_scope") \
        + ":" + spec.methods + ":" + str(hash_keys(instances))
    old = _read_json(manifest_path)
    if not force and old is not None and old.get("fingerprint") == fp \
            and all((out / e["file"]).exists() for e in old["entries"]):
        print(f"featurize: {out} is up to date ({len(old['entries'])} tensors)")
        return out

    source = ScenarioSource(cfg)
    _check_fits(cfg, source, instances, spec)
    raw = raw_cache if raw_cache is not None else {}
    for key in instances:
        if key not in raw:
            raw[key] = assemble(source.scenario(key))
    splits = {key: _split(cfg, key) for key in instances}
    train_keys = [k for k in instances if splits[k] == "train"]
    if not train_keys:
        raise DataContractError("the train split is empty; add scenarios or change the split fractions/seed")
    stats = fit_stats(raw[k] for k in (train_keys if cfg.stats_scope == "train" else instances))

    if out.exists():
        shutil.rmtree(out)
    (out / "tensors").mkdir(parents=True)
    entries = []
    for key in instances:
        try:
            x = rescale(apply_stats(raw[key], stats), spec)
        except RescaleError as exc:
            raise DataContractError(f"map {key[0]}: {exc}") from None
        name = f"tensors/{_tensor_name(key)}"
        write_tensor(out / name, x)
        entries.append({"map": key[0], "scenario": key[1], "agents": key[2], "split": splits[key], "file": name})
    labels = [f"../../labels/{lay.label_file(o).name}" for o in cfg.objective_specs()]
    write_manifest(manifest_path, name=f"mapfsel-{spec.methods}", spec=spec, stats=stats, entries=entries,
                   label_files=labels,
                   extra={"split_seed": cfg.split_seed, "split_fractions": list(cfg.fractions),
                          "stats_scope": cfg.stats_scope,
                          "fingerprint": fp})
    counts = {s: sum(1 for e in entries if e["split"] == s) for s in ("train", "val", "test")}
    print(f"featurize: {len(entries)} tensors ({spec.methods}, {spec.target}x{spec.target}) -> {out}  {counts}")
    return out


def hash_keys(keys: Sequence) -> str:
    return hashlib.sha256(repr(list(keys)).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# label


def cmd_label(cfg: PipelineConfig, lay: Layout, force: bool = False) -> None:
    objectives = cfg.objective_specs()
    records = _load_records(lay)
    stamp_path = lay.labels / "stamp.json"
    fp = cfg.fingerprint("portfolio", "time_limit", "penalty", "objectives") + ":" + hash_keys(
        sorted((r.key, r.success, r.cost, r.time) for r in records))
    stamp = _read_json(stamp_path)
    if not force and stamp is not None and stamp.get("fingerprint") == fp \
            and all(lay.label_file(o).exists() for o in objectives):
        print(f"label: {lay.labels} is up to date")
        return
    source = ScenarioSource(cfg)
    groups = group_records(records)
    bounds = {key: cost_bound(source.scenario(key)) for key in groups}
    solver_ids = cfg.solver_ids()
    lay.labels.mkdir(parents=True, exist_ok=True)
    for obj in objectives:
        labeled = label_dataset(groups, bounds, obj, solver_ids, cfg.time_limit, cfg.penalty)
        write_labels(labeled, lay.label_file(obj), obj, solver_ids)
        print(f"label: {obj}: {len(labeled)} labeled, {len(groups) - len(labeled)} dropped -> "
              f"{lay.label_file(obj)}")
    stamp_path.write_text(json.dumps({"fingerprint": fp}) + "\n")


# ---------------------------------------------------------------------------
# train / eval


def _load_manifest(lay: Layout, spec: RescaleSpec) -> tuple[Path, dict]:
    out = lay.features(spec.methods)
    manifest = _read_json(out / "manifest.json")
    if manifest is None:
        raise UsageError(f"no features for rescale spec {spec.methods}; run 'mapfsel featurize' first")
    if manifest["shape"][1] != spec.target:
        raise UsageError(f"{out} was built for target {manifest['shape'][1]}, not {spec.target}; "
                         f"rerun featurize with --force")
    return out, manifest


def _load_labels(lay: Layout, obj: Objective, solver_ids: Sequence[str]) -> list[LabeledInstance]:
    path = lay.label_file(obj)
    if not path.exists():
        raise UsageError(f"no labels for {obj}; run 'mapfsel label' first")
    _, ids, instances = read_labels(path)
    if list(ids) != list(solver_ids):
        raise UsageError(f"{path} was labeled for portfolio {ids}, config has {list(solver_ids)}; "
                         f"rerun label with --force")
    return instances


def _samples(instances: Sequence[LabeledInstance], feat_dir: Path, manifest: dict,
             with_tensor: bool) -> dict[str, list[tuple[LabeledInstance, TrainSample]]]:
    by_key = {(e["map"], e["scenario"], e["agents"]): e for e in manifest["entries"]}
    side = manifest["shape"][1]
    out: dict[str, list] = {"train": [], "val": [], "test": []}
    for inst in instances:
        entry = by_key.get(inst.key)
        if entry is None:
            raise DataContractError(f"labeled instance {inst.key} has no feature tensor in {feat_dir}; "
                                    f"rerun featurize")
        x = read_tensor(feat_dir / entry["file"], side)
        sample = TrainSample(x if with_tensor else None, inst.key[2], inst.label,
                             np.asarray(inst.scores, dtype=np.float64), pool_features(x, inst.key[2]))
        out[entry["split"]].append((inst, sample))
    return out


def _check_task(obj: Objective, loss: str) -> None:
    if obj.family == "bound" and loss.upper() == "REG":
        raise UsageError(f"task {task_name(obj, loss)}: REG needs per-solver scores under a score objective; "
                         f"train bound objectives with CE or BCE")


def cmd_train(cfg: PipelineConfig, lay: Layout, force: bool = False, spec_text: str | None = None) -> list[Path]:
    spec = cfg.rescale_spec(spec_text)
    loss = cfg.loss_spec()
    objectives = cfg.objective_specs()
    for obj in objectives:
        _check_task(obj, loss.kind)
    feat_dir, manifest = _load_manifest(lay, spec)
    solver_ids = cfg.solver_ids()
    tcfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.train_seed, cfg.augment)
    written = []
    for obj in objectives:
        task = task_name(obj, loss.kind)
        model_path = lay.model(spec.methods, task)
        meta_path = model_path.with_suffix(".meta.json")
        instances = _load_labels(lay, obj, solver_ids)
        fp = cfg.fingerprint("learning_rate", "epochs", "batch_size", "train_seed", "augment") + ":" \
            + manifest["fingerprint"] + ":" + hash_keys([(i.key, i.label, i.scores) for i in instances])
        meta = _read_json(meta_path)
        if not force and meta is not None and meta.get("fingerprint") == fp and model_path.exists():
            print(f"train: {task} ({spec.methods}) is up to date")
            written.append(model_path)
            continue
        split = _samples(instances, feat_dir, manifest, with_tensor=cfg.augment)
        train_set = [s for _, s in split["train"]]
        val_set = [s for _, s in split["val"]]
        if not train_set:
            raise DataContractError(f"{task}: no labeled instances in the train split")
        result = train(train_set, solver_ids, loss, tcfg, val_set or None)
        model_path.parent.mkdir(parents=True, exist_ok=True)
        result.model.save(model_path)
        with model_path.with_name(f"{task}.trajectory.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for e, (tr, vl) in enumerate(zip(result.train_loss, result.val_loss), start=1):
                w.writerow([e, repr(tr), repr(vl)])
        meta_path.write_text(json.dumps({"task": task, "rescale": spec.methods, "best_epoch": result.best_epoch,
                                         "train_size": len(train_set), "val_size": len(val_set),
                                         "fingerprint": fp}, indent=1) + "\n")
        print(f"train: {task} ({spec.methods}) best epoch {result.best_epoch}/{tcfg.epochs}, "
              f"train loss {result.train_loss[result.best_epoch - 1]:.4f} -> {model_path}")
        written.append(model_path)
    return written


def _predict(model: SelectorModel, samples: Sequence[TrainSample]) -> list[int]:
    if not samples:
        return []
    probs = predict_proba(model, np.stack([s.phi for s in samples]))
    return [int(i) for i in np.argmax(probs, axis=1)]


def cmd_eval(cfg: PipelineConfig, lay: Layout, force: bool = False,
             spec_text: str | None = None) -> dict[str, dict[str, str]]:
    spec = cfg.rescale_spec(spec_text)
    loss = cfg.loss_spec()
    objectives = cfg.objective_specs()
    for obj in objectives:
        _check_task(obj, loss.kind)
        task = task_name(obj, loss.kind)
        if not lay.model(spec.methods, task).exists():
            raise UsageError(f"task {task} ({spec.methods}) has not been trained; run 'mapfsel train' first")
    feat_dir, manifest = _load_manifest(lay, spec)
    solver_ids = cfg.solver_ids()
    results = {}
    for obj in objectives:
        task = task_name(obj, loss.kind)
        model = SelectorModel.load(lay.model(spec.methods, task), solver_ids)
        split = _samples(_load_labels(lay, obj, solver_ids), feat_dir, manifest, with_tensor=False)
        train_inst = [i for i, _ in split["train"]]
        eval_name = "test" if split["test"] else "val"
        eval_pairs = split[eval_name]
        if not train_inst or not eval_pairs:
            raise DataContractError(f"{task}: evaluation needs nonempty train and test (or val) splits")
        baselines = compute_vbs_sbs(train_inst)
        train_pred = _predict(model, [s for _, s in split["train"]])
        eval_inst = [i for i, _ in eval_pairs]
        report = gap_report(_predict(model, [s for _, s in eval_pairs]), eval_inst, baselines,
                            fit_size=len(train_inst), fit_split=train_inst, fit_predictions=train_pred)
        train_labels = [i.label for i in train_inst]
        rows = [("task", task), ("rescale", spec.methods), ("eval_split", eval_name), *report.rows(),
                ("train_accuracy", repr(accuracy(train_pred, train_labels))),
                ("sbs_acc_train_frequency", repr(accuracy([baselines.sbs_acc] * len(train_inst), train_labels)))]
        path = lay.eval_report(spec.methods, obj, loss.kind)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_metric_csv(path, rows)
        flag = " (degenerate split)" if report.degenerate else ""
        print(f"eval: {task} ({spec.methods}) acc {report.accuracy:.3f} gap {report.gap:.3f}{flag} "
              f"[{eval_name} n={report.eval_size}, SBS_Gap={report.sbs_gap}] -> {path}")
        results[task] = dict(rows)
    return results


# ---------------------------------------------------------------------------
# report / ablate


def cmd_report(cfg: PipelineConfig, lay: Layout, force: bool = False) -> list[Path]:
    solver_ids = cfg.solver_ids()
    lay.reports.mkdir(parents=True, exist_ok=True)
    written = []
    for obj in cfg.objective_specs():
        instances = _load_labels(lay, obj, solver_ids)
        if not instances:
            raise DataContractError(f"no labeled instances for {obj}")
        csv_path = lay.reports / f"frequency_{objective_token(obj)}.csv"
        write_frequency_csv(csv_path, instances)
        svg_path = csv_path.with_suffix(".svg")
        svg_path.write_text(frequency_svg(instances, title=f"Best solver frequency per map ({obj})"))
        written += [csv_path, svg_path]
        print(f"report: {csv_path} and {svg_path.name}")
    for path in sorted(lay.reports.glob("*/eval_*.csv")):
        with path.open(newline="") as fh:
            d = {row[0]: row[1] for row in csv.reader(fh)}
        print(f"  {d.get('task', '?'):<22} {d.get('rescale', '?'):<8} acc {float(d['accuracy']):.3f} "
              f"gap {float(d['gap']):.3f}")
    return written


def expand_specs(items: Sequence[str], target: int) -> list[str]:
    out: list[str] = []
    for item in items or ["all"]:
        group = expand_group_specs() if item.strip().lower() == "all" else [item]
        for s in group:
            try:
                m = RescaleSpec.parse(s, target).methods
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            if m not in out:
                out.append(m)
    return out


def cmd_ablate(cfg: PipelineConfig, lay: Layout, force: bool = False,
               specs: Sequence[str] = ("all",)) -> list[Path]:
    methods = expand_specs(specs, cfg.target)
    loss = cfg.loss_spec()
    objectives = cfg.objective_specs()
    for obj in objectives:
        _check_task(obj, loss.kind)
    cmd_label(cfg, lay, force=False)
    raw: dict[Key, FeatureTensor] = {}
    table: dict[str, list[tuple[str, float, float]]] = {task_name(o, loss.kind): [] for o in objectives}
    for m in methods:
        print(f"ablate: rescale {m[:3]} {m[3:]}")
        cmd_featurize(cfg, lay, force, m, raw_cache=raw)
        cmd_train(cfg, lay, force, m)
        for task, rows in cmd_eval(cfg, lay, force, m).items():
            table[task].append((m, float(rows["gap"]), float(rows["accuracy"])))
    lay.reports.mkdir(parents=True, exist_ok=True)
    written = []
    for obj in objectives:
        task = task_name(obj, loss.kind)
        # built by hand: objective tokens contain dots, so with_suffix would truncate them
        base = f"ablation_{objective_token(obj)}_{loss.kind}"
        csv_path, txt_path = lay.reports / f"{base}.csv", lay.reports / f"{base}.txt"
        text = write_ablation(ablation_table(table[task]), csv_path, txt_path)
        print(f"{task}:\n{text}")
        written.append(csv_path)
    return written


# ---------------------------------------------------------------------------
# argument parsing


COMMANDS = {
    "sweep": (cmd_sweep, "run the solver portfolio over agent-count tiers and log run records"),
    "featurize": (cmd_featurize, "build, normalise and rescale 7-channel feature tensors"),
    "label": (cmd_label, "derive per-objective labels from the run records"),
    "train": (cmd_train, "train one selector per (objective, loss) task"),
    "eval": (cmd_eval, "accuracy and VBS-SBS gap of trained selectors"),
    "report": (cmd_report, "per-map label frequency tables and charts"),
    "ablate": (cmd_ablate, "featurize/train/eval across rescale specs and tabulate"),
}


def _config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("pipeline settings (override the config file)")
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        names = [flag, "--out"] if f.name == "output_dir" else [flag]
        g.add_argument(*names, dest=f.name, default=None, type=f.metadata["conv"],
                       metavar=f.metadata["key"].upper(),
                       help=f"[{f.metadata['section']}] {f.metadata['key']}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="INI config file")
    common.add_argument("--force", action="store_true", help="redo completed outputs")
    common.add_argument("-v", "--verbose", action="count", default=0)
    _config_flags(common)

    parser = argparse.ArgumentParser(prog="mapfsel", description="MAPF algorithm-selection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "ablate":
            p.add_argument("specs", nargs="*", default=["all"],
                           help="rescale specs such as 'ppp rrrp', or 'all' for the 16 grouped specs")
    dump = sub.add_parser("config", parents=[common], help="print the effective configuration")
    dump.set_defaults(command="config")
    return parser


class _ArgumentError(Exception):
    pass


def _parse(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        raise _ArgumentError(exc.code) from None


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parse(argv)
    except _ArgumentError as exc:
        return int(exc.args[0] or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "config":
            sys.stdout.write(config_text(cfg))
            return EXIT_OK
        lay = Layout(cfg.output_dir)
        lay.root.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(lay.root / ".mapfsel.lock"))
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise UsageError(f"{lay.root} is locked by another mapfsel process") from None
        try:
            fn = COMMANDS[args.command][0]
            if args.command == "ablate":
                fn(cfg, lay, args.force, args.specs)
            else:
                fn(cfg, lay, args.force)
        finally:
            lock.release()
    except UsageError as exc:
        print(f"mapfsel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataContractError as exc:
        print(f"mapfsel: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
