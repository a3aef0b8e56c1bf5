"""Command-line entry point: pretrain | train | generate | evaluate | hillclimb.

Settings come from a flat ``key = value`` file (``#`` comments) overlaid by
flags. Every command writes its effective settings to ``<out>/config.txt``;
passing that file back with ``--config`` replays the run.

Exit status: 0 success, 2 config/input error, 3 integrity error, 4 divergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chemprops import PLOGP_NOTE, PropertyFn, diversity, property_fn, similarity
from .env import EnvConfig, MoleculeEnv, anchors_from_corpus
from .errors import (ConfigError, EmptyCorpusError, IntegrityError, PreconditionError,
                     TrainingDivergenceError)
from .molgraph import is_connected, is_valid
from .nets import GcpnConfig, GcpnPolicy, load_checkpoint
from .tensor import AdamState
from .smiles import SmilesParseError, load_corpus, parse, write
from .trainer import REPORT_FIELDS, PpoConfig, Trainer, collect_rollouts, expert_pretrain, hill_climb, load_models, save_models
from .utils.rng import stream
from .utils.validation import parse_range

logger = logging.getLogger("gcpn")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRITY, EXIT_DIVERGENCE = 0, 2, 3, 4
DELTAS = (0.0, 0.2, 0.4, 0.6)


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _opt_str(text: str) -> str:
    return str(text).strip()


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "task": (_opt_str, "optimize"),          # optimize | target | constrained
    "property": (_opt_str, "plogp"),
    "target": (_opt_str, ""),
    "anchors": (_opt_str, ""),
    "atom_cap": (int, 38),
    "step_limit": (int, 0),
    "filter": (_bool, True),
    "adversarial": (_bool, False),
    "step_adversarial": (_bool, False),
    "corpus": (_opt_str, ""),
    "out": (_opt_str, "out"),
    "seed": (int, 0),
    "checkpoint": (_opt_str, ""),
    "count": (int, 100),
    "constrained": (_opt_str, ""),
    "delta": (float, 0.4),
    "iterations": (int, 100),
    "episodes": (int, 16),
    "epochs": (int, 4),
    "minibatch": (int, 32),
    "lr": (float, 1e-3),
    "expert_lr": (float, 2.5e-4),
    "disc_lr": (float, 1e-3),
    "clip": (float, 0.2),
    "gamma": (float, 1.0),
    "lam": (float, 0.95),
    "value_coef": (float, 0.5),
    "entropy_coef": (float, 0.01),
    "max_grad_norm": (float, 0.5),
    "expert": (_bool, True),
    "expert_steps": (int, 1),
    "disc_steps": (int, 1),
    "checkpoint_every": (int, 50),
    "pretrain_epochs": (int, 10),
    "layers": (int, 3),
    "embed_dim": (int, 64),
    "aggregation": (_opt_str, "sum"),
    "batch_norm": (_bool, True),
    "readout": (_opt_str, "sum"),
    "restarts": (int, 5),
}


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = value
    return raw


def resolve_config(raw: dict[str, str]) -> dict:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def echo_config(cfg: dict, command: str, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"# effective settings for `gcpn {command}`"]
    lines += [f"{k} = {_fmt(cfg[k])}" for k in SCHEMA]
    path = out / "config.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------- wiring helpers

def make_property(cfg: dict) -> PropertyFn:
    target = parse_range(cfg["target"], "target") if cfg["target"] else None
    if cfg["task"] == "target" and target is None:
        raise ConfigError("task = target needs a target range")
    return property_fn(cfg["property"], target)


def load_corpus_graphs(cfg: dict, required: bool):
    if not cfg["corpus"]:
        if required:
            raise ConfigError("a corpus path is required for this command")
        return []
    path = Path(cfg["corpus"])
    if not path.is_file():
        raise ConfigError(f"corpus file not found: {path}")
    report = load_corpus(path, cfg["atom_cap"])
    for lineno, text, reason in report.rejected:
        logger.warning("corpus line %d (%s) rejected: %s", lineno, text, reason)
    return report.graphs


def load_molecule_list(path_text: str, atom_cap: int):
    path = Path(path_text)
    if not path.is_file():
        raise ConfigError(f"molecule list not found: {path}")
    return load_corpus(path, atom_cap).graphs


def make_env_config(cfg: dict, prop: PropertyFn, corpus) -> EnvConfig:
    if cfg["anchors"]:
        anchors = parse_range(cfg["anchors"], "anchors")
    elif corpus:
        anchors = anchors_from_corpus(prop, corpus)
    else:
        anchors = None
    return EnvConfig(atom_cap=cfg["atom_cap"], step_limit=cfg["step_limit"] or None, prop=prop,
                     anchors=anchors, filter_reward=cfg["filter"], final_adversarial=cfg["adversarial"],
                     step_adversarial=cfg["adversarial"] and cfg["step_adversarial"])


def make_net_config(cfg: dict) -> GcpnConfig:
    return GcpnConfig(layers=cfg["layers"], embed_dim=cfg["embed_dim"], aggregation=cfg["aggregation"],
                      batch_norm=cfg["batch_norm"], atom_cap=cfg["atom_cap"], readout=cfg["readout"])


def make_ppo_config(cfg: dict) -> PpoConfig:
    keys = ("clip", "gamma", "lam", "epochs", "minibatch", "lr", "expert_lr", "disc_lr", "value_coef",
            "entropy_coef", "max_grad_norm", "episodes", "iterations", "expert_steps", "disc_steps",
            "checkpoint_every", "seed")
    return PpoConfig(**{k: cfg[k] for k in keys})


def load_policy(path_text: str):
    path = Path(path_text)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_models(load_checkpoint(path))


# ---------------------------------------------------------------- commands

def cmd_pretrain(cfg: dict, out: Path) -> None:
    corpus = load_corpus_graphs(cfg, required=True)
    if cfg["checkpoint"]:
        policy, _ = load_policy(cfg["checkpoint"])
    else:
        policy = GcpnPolicy.initialize(make_net_config(cfg), stream(cfg["seed"], "init"))
    rng = stream(cfg["seed"], "expert")
    opt = AdamState(lr=cfg["expert_lr"])
    steps_per_epoch = max(1, math.ceil(len(corpus) / cfg["minibatch"]))
    lines = []
    for epoch in range(1, cfg["pretrain_epochs"] + 1):
        losses = expert_pretrain(corpus, policy, steps_per_epoch, rng, batch_size=cfg["minibatch"],
                                 atom_cap=cfg["atom_cap"], opt=opt)
        lines.append(f"epoch={epoch} loss={float(np.mean(losses)):.10g}")
    (out / "pretrain_loss.log").write_text("\n".join(lines) + ("\n" if lines else ""))
    save_models(out / "checkpoint.bin", policy)


def cmd_train(cfg: dict, out: Path) -> None:
    prop = make_property(cfg)
    starts = None
    if cfg["task"] == "constrained":
        if not cfg["constrained"]:
            raise ConfigError("task = constrained needs a molecule list (--constrained PATH)")
        starts = load_molecule_list(cfg["constrained"], cfg["atom_cap"])
    elif cfg["task"] not in ("optimize", "target"):
        raise ConfigError(f"unknown task {cfg['task']!r}")
    corpus = load_corpus_graphs(cfg, required=cfg["adversarial"])
    env_config = make_env_config(cfg, prop, corpus)
    policy = disc = None
    if cfg["checkpoint"]:
        policy, disc = load_policy(cfg["checkpoint"])
    trainer = Trainer(env_config, make_ppo_config(cfg), make_net_config(cfg) if policy is None else policy.config,
                      corpus, policy=policy, discriminator=disc, starts=starts, expert=cfg["expert"])
    report_path = out / "report.log"
    header = f"# fields: {' '.join(REPORT_FIELDS)}"
    if prop.kind == "penalized_logp_lite" or (prop.inner is not None and prop.inner.kind == "penalized_logp_lite"):
        header += f"\n# note: {PLOGP_NOTE}"
    with report_path.open("w") as fh:
        fh.write(header + "\n")

        def on_record(rec):
            fh.write(rec.to_line() + "\n")
            fh.flush()

        report = trainer.train(out, on_record)
    if report.checkpoints:
        shutil.copyfile(report.checkpoints[-1], out / "checkpoint.bin")


def cmd_generate(cfg: dict, out: Path) -> None:
    if not cfg["checkpoint"]:
        raise ConfigError("generate needs --checkpoint PATH")
    policy, _ = load_policy(cfg["checkpoint"])
    atom_cap = min(cfg["atom_cap"], policy.config.atom_cap)
    env = MoleculeEnv(EnvConfig(atom_cap=atom_cap, step_limit=cfg["step_limit"] or None, filter_reward=False))
    lines = []
    if cfg["count"] > 0:
        trajs = collect_rollouts(env, policy, cfg["count"], stream(cfg["seed"], "env"))
        lines = [write(t.final_graph) for t in trajs]
    (out / "molecules.smi").write_text("".join(line + "\n" for line in lines))


@dataclass
class EvalSummary:
    top3: list[float]
    validity: float
    diversity: float
    success: float | None
    n_total: int
    constrained: dict | None = None

    def lines(self, prop: PropertyFn) -> list[str]:
        out = [f"property = {prop.name}",
               f"molecules = {self.n_total}",
               "top3 = " + " ".join(f"{v:.6f}" for v in self.top3),
               f"validity = {self.validity:.6f}",
               f"diversity = {self.diversity:.6f}"]
        if self.success is not None:
            out.append(f"success = {self.success:.6f}")
        if self.constrained:
            for delta, rows in self.constrained.items():
                imp = [r[1] for r in rows if r[1] is not None]
                mean = f"{np.mean(imp):.6f}" if imp else "nan"
                std = f"{np.std(imp):.6f}" if imp else "nan"
                out.append(f"delta = {delta:.1f} improvement_mean = {mean} improvement_std = {std} "
                           f"success = {len(imp) / len(rows):.6f}")
                for ref, improvement, sim in rows:
                    out.append(f"  ref = {ref} improvement = "
                               f"{'nan' if improvement is None else f'{improvement:.6f}'} "
                               f"similarity = {'nan' if sim is None else f'{sim:.6f}'}")
        if prop.kind == "penalized_logp_lite" or (prop.inner is not None and prop.inner.kind == "penalized_logp_lite"):
            out.append(f"# note: {PLOGP_NOTE}")
        return out


def evaluate_molecules(lines: list[str], prop: PropertyFn, atom_cap: int, references=None,
                       deltas=DELTAS) -> EvalSummary:
    if not lines:
        raise ConfigError("molecule file is empty")
    graphs = []
    for text in lines:
        try:
            g = parse(text)
        except SmilesParseError:
            continue
        if is_valid(g, atom_cap) and is_connected(g):
            graphs.append(g)
    scores = sorted((prop.score(g) for g in graphs), reverse=True)
    div = diversity(graphs) if len(graphs) >= 2 else float("nan")
    success = float(np.mean([prop.success(g) for g in graphs])) if prop.kind == "target_range" and graphs else None
    constrained = None
    if references:
        constrained = {}
        for delta in deltas:
            rows = []
            for ref in references:
                base = prop.score(ref)
                best = None
                for g in graphs:
                    sim = similarity(g, ref)
                    if sim >= delta:
                        gain = prop.score(g) - base
                        if best is None or gain > best[0]:
                            best = (gain, sim)
                rows.append((write(ref), best[0] if best else None, best[1] if best else None))
            constrained[delta] = rows
    return EvalSummary(scores[:3], len(graphs) / len(lines), div, success, len(lines), constrained)


def cmd_evaluate(cfg: dict, out: Path, molecules: str | None) -> EvalSummary:
    if not molecules:
        raise ConfigError("evaluate needs a molecule file")
    path = Path(molecules)
    if not path.is_file():
        raise ConfigError(f"molecule file not found: {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    prop = make_property(cfg)
    refs = load_molecule_list(cfg["constrained"], cfg["atom_cap"]) if cfg["constrained"] else None
    deltas = tuple(sorted(set(DELTAS) | {cfg["delta"]}))
    summary = evaluate_molecules(lines, prop, cfg["atom_cap"], refs, deltas)
    text = "\n".join(summary.lines(prop)) + "\n"
    (out / "evaluation.txt").write_text(text)
    sys.stdout.write(text)
    return summary


def cmd_hillclimb(cfg: dict, out: Path) -> None:
    prop = make_property(cfg)
    env = MoleculeEnv(EnvConfig(atom_cap=cfg["atom_cap"], prop=prop, filter_reward=False))
    results = hill_climb(env, prop.reward, stream(cfg["seed"], "policy"), cfg["restarts"])
    (out / "molecules.smi").write_text("".join(write(r.graph) + "\n" for r in results))
    rows = ["rank\tscore\tatoms\tsmiles"]
    rows += [f"{i + 1}\t{r.score:.6f}\t{r.graph.n}\t{write(r.graph)}" for i, r in enumerate(results)]
    (out / "scores.tsv").write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcpn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pretrain", "train", "generate", "evaluate", "hillclimb"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--checkpoint")
        p.add_argument("--count", type=int)
        p.add_argument("--property")
        p.add_argument("--target", help="LO:HI target range")
        p.add_argument("--constrained", help="molecule list for constrained mode")
        p.add_argument("--delta", type=float)
        p.add_argument("--corpus")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        if name == "evaluate":
            p.add_argument("molecules", help="molecule file, one SMILES per line")
    return parser


def effective_config(args) -> dict:
    raw = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    for flag in ("seed", "out", "checkpoint", "count", "property", "target", "constrained", "delta", "corpus"):
        value = getattr(args, flag)
        if value is not None:
            raw[flag] = str(value)
    if args.command == "train" and args.target and "task" not in raw:
        raw["task"] = "target"
    if args.command == "train" and args.constrained and "task" not in raw:
        raw["task"] = "constrained"
    return resolve_config(raw)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        out = Path(cfg["out"])
        echo_config(cfg, args.command, out)
        if args.command == "pretrain":
            cmd_pretrain(cfg, out)
        elif args.command == "train":
            cmd_train(cfg, out)
        elif args.command == "generate":
            cmd_generate(cfg, out)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, out, args.molecules)
        else:
            cmd_hillclimb(cfg, out)
    except IntegrityError as exc:
        print(f"error: integrity: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except TrainingDivergenceError as exc:
        print(f"error: divergence: {exc}; last good checkpoint: {exc.checkpoint}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigError, EmptyCorpusError, PreconditionError, SmilesParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
