"""Iterated-learning chains of WaveGAN generations.

Generation 1 trains on the source corpus. Every later generation trains a
freshly initialized network on nothing but the WAV files emitted by the
generation before it. Each generation's artifacts live under ``gen{k}/``::

    gen{k}/checkpoints/final.npz
    gen{k}/outputs/*.wav, manifest.jsonl
    gen{k}/metrics.csv

and the whole chain is described by ``lineage.json``, rewritten atomically
after every finished generation so an interrupted run can be resumed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gan
from .corpus import load_corpus_dir, write_corpus_dir
from .corpus.wavio import to_pcm16
from .errors import ConfigError, DivergedError, EmptyCorpus, ResumeError

SCHEMA_VERSION = 1
MANIFEST_NAME = "lineage.json"


@dataclass(frozen=True)
class LineageConfig:
    """How a chain is run.

    ``gan.seed`` is ignored: every generation gets its own seed derived from
    ``master_seed``. ``steps_per_generation`` overrides ``gan.total_steps``
    generation by generation when given.
    """

    gan: gan.GanConfig = field(default_factory=gan.GanConfig)
    n_generations: int = 4
    n_generate: int = 1000
    master_seed: int = 0
    steps_per_generation: tuple | None = None
    record_wallclock: bool = False

    def validate(self) -> None:
        self.gan.validate()
        if self.n_generations < 1:
            raise ConfigError("n_generations must be >= 1")
        if self.n_generate < 1:
            raise ConfigError("n_generate must be >= 1, otherwise the chain cannot continue")
        if self.steps_per_generation is not None:
            if len(self.steps_per_generation) < self.n_generations:
                raise ConfigError("steps_per_generation is shorter than n_generations")
            if any(int(s) < 0 for s in self.steps_per_generation):
                raise ConfigError("steps_per_generation entries must be >= 0")

    def steps_for(self, gen_index: int) -> int:
        if self.steps_per_generation is None:
            return self.gan.total_steps
        return int(self.steps_per_generation[gen_index - 1])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["steps_per_generation"] = (None if self.steps_per_generation is None
                                     else [int(s) for s in self.steps_per_generation])
        return d

    def hash(self) -> str:
        return gan.config_hash(self.to_dict())

    def chain_hash(self) -> str:
        """Hash of everything that shapes a generation, i.e. all but the chain length."""
        d = self.to_dict()
        d.pop("n_generations")
        return gan.config_hash(d)


def generation_seed(master_seed: int, gen_index: int) -> int:
    """Per-generation seed hashed from the master seed and the index."""
    return int(np.random.SeedSequence([master_seed, gen_index]).generate_state(1)[0])


def generation_config(config: LineageConfig, gen_index: int) -> gan.GanConfig:
    return dataclasses.replace(config.gan, seed=generation_seed(config.master_seed, gen_index),
                               total_steps=config.steps_for(gen_index))


def gen_id(gen_index: int) -> str:
    return f"gen{gen_index}"


def inventory_hash(clips) -> str:
    """Hash of ids and 16-bit sample data, in id order."""
    h = hashlib.sha256()
    for clip in sorted(clips, key=lambda c: c.id):
        h.update(clip.id.encode())
        h.update(to_pcm16(np.nan_to_num(clip.samples)).tobytes())
    return h.hexdigest()


def ids_hash(ids) -> str:
    return hashlib.sha256("\n".join(sorted(ids)).encode()).hexdigest()


def plan_lineage(config: LineageConfig, corpus_size: int) -> list:
    """Ledger of steps, training items and epochs without training anything."""
    config.validate()
    rows = []
    n_items = corpus_size
    for k in range(1, config.n_generations + 1):
        steps = config.steps_for(k)
        rows.append({
            "gen_index": k,
            "source": "corpus" if k == 1 else gen_id(k - 1),
            "total_steps": steps,
            "n_training_items": n_items,
            "epochs": gan.epochs_after(steps, config.gan.batch_size, n_items, config.gan.critic_iters),
            "n_generated": config.n_generate,
        })
        n_items = config.n_generate
    return rows


def run_generation(source_clips, config: LineageConfig, gen_index: int, out_dir, *,
                   source: str | None = None, progress=None) -> dict:
    """Train a fresh network on ``source_clips`` and write its outputs.

    Returns the manifest entry. Every artifact is on disk before returning.
    A diverged run leaves ``checkpoints/last_good.npz`` behind and re-raises
    the ``DivergedError`` with ``generation`` set.
    """
    if gen_index < 1:
        raise ConfigError("gen_index must be >= 1")
    config.validate()
    source_clips = list(source_clips)
    if not source_clips:
        raise EmptyCorpus(f"{gen_id(gen_index)} has no training clips")
    if source is None:
        source = "corpus" if gen_index == 1 else gen_id(gen_index - 1)
    cfg = generation_config(config, gen_index)
    root = Path(out_dir) / gen_id(gen_index)
    if root.exists():
        shutil.rmtree(root)
    ckpt_dir = root / "checkpoints"

    def report(m):
        if progress is not None:
            progress(gen_index, cfg.total_steps, m)

    try:
        result = gan.train(source_clips, cfg, checkpoint_dir=ckpt_dir, metrics_path=root / "metrics.csv",
                           record_wallclock=config.record_wallclock, progress=report)
    except DivergedError as exc:
        exc.generation = gen_index
        raise
    out_rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, gen_index, 1]))
    clips = gan.generate_batch(result.checkpoint, config.n_generate, out_rng,
                               id_prefix=f"{gen_id(gen_index)}_")
    write_corpus_dir(clips, root / "outputs")
    # hash what the next generation will actually read, i.e. the 16-bit files
    written = load_corpus_dir(root / "outputs", length=cfg.output_len)
    return {
        "gen_index": gen_index,
        "id": gen_id(gen_index),
        "source": source,
        "source_hash": inventory_hash(source_clips),
        "training_ids_hash": ids_hash(c.id for c in source_clips),
        "total_steps": cfg.total_steps,
        "n_training_items": len(source_clips),
        "epochs": result.epochs,
        "n_generated": len(written),
        "generated_ids_hash": ids_hash(c.id for c in written),
        "outputs_hash": inventory_hash(written),
        "checkpoint": f"{gen_id(gen_index)}/checkpoints/final.npz",
        "output_dir": f"{gen_id(gen_index)}/outputs",
        "metrics": f"{gen_id(gen_index)}/metrics.csv",
        "config_hash": cfg.hash(),
        "rng_seed": cfg.seed,
        "init_generator_hash": result.init_generator_hash,
        "final_generator_hash": result.checkpoint.generator_hash(),
        "status": "complete",
    }


def _new_manifest(config: LineageConfig, corpus_dir, corpus_clips, run_config_hash):
    return {
        "schema_version": SCHEMA_VERSION,
        "status": "running",
        "lineage_config": config.to_dict(),
        "lineage_config_hash": config.hash(),
        "chain_hash": config.chain_hash(),
        "run_config_hash": run_config_hash,
        "master_seed": config.master_seed,
        "n_generations": config.n_generations,
        "corpus": {
            "path": str(Path(corpus_dir).resolve()) if corpus_dir is not None else None,
            "n_items": len(corpus_clips),
            "hash": inventory_hash(corpus_clips),
        },
        "generations": [],
        "failure": None,
    }


def write_manifest(manifest: dict, out_dir) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def read_manifest(out_dir) -> dict:
    path = Path(out_dir)
    if path.is_dir():
        path = path / MANIFEST_NAME
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema version {manifest.get('schema_version')!r}")
    return manifest


def verify_generation(entry: dict, out_dir, length: int = gan.GanConfig.output_len) -> None:
    """Check a finished generation's checkpoint and outputs against its entry."""
    k = entry["gen_index"]
    out_dir = Path(out_dir)
    try:
        ckpt = gan.load_checkpoint(out_dir / entry["checkpoint"])
    except Exception as exc:
        raise ResumeError(f"{gen_id(k)}: checkpoint unreadable ({exc})", generation=k) from exc
    if ckpt.generator_hash() != entry["final_generator_hash"]:
        raise ResumeError(f"{gen_id(k)}: checkpoint hash differs from the manifest", generation=k)
    try:
        clips = load_corpus_dir(out_dir / entry["output_dir"], length=length)
    except Exception as exc:
        raise ResumeError(f"{gen_id(k)}: outputs unreadable ({exc})", generation=k) from exc
    if inventory_hash(clips) != entry["outputs_hash"]:
        raise ResumeError(f"{gen_id(k)}: outputs differ from the manifest", generation=k)


def run_lineage(corpus, config: LineageConfig, out_dir, *, corpus_dir=None, run_config_hash=None,
                resume=True, progress=None) -> dict:
    """Run (or continue) a chain of ``config.n_generations`` generations.

    ``corpus`` is the list of source clips. When ``out_dir`` already holds a
    manifest and ``resume`` is true, generations recorded as complete are
    hash-verified and skipped; the first unfinished one is retrained from
    scratch. Returns the manifest dict, which is also on disk.
    """
    config.validate()
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("source corpus is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fresh = _new_manifest(config, corpus_dir, corpus, run_config_hash)
    done = []
    if (out_dir / MANIFEST_NAME).exists():
        if not resume:
            raise ConfigError(f"{out_dir} already holds a lineage; resume it or pick a new directory")
        old = read_manifest(out_dir)
        if old.get("chain_hash") != fresh["chain_hash"]:
            raise ResumeError("existing lineage was run with a different configuration")
        if old["corpus"]["hash"] != fresh["corpus"]["hash"]:
            raise ResumeError("existing lineage was trained on a different corpus")
        for entry in old["generations"]:
            if entry.get("status") != "complete":
                break
            verify_generation(entry, out_dir, config.gan.output_len)
            done.append(entry)
    manifest = fresh
    manifest["generations"] = done
    write_manifest(manifest, out_dir)

    length = config.gan.output_len
    source = corpus if not done else load_corpus_dir(out_dir / done[-1]["output_dir"], length=length)
    for k in range(len(done) + 1, config.n_generations + 1):
        try:
            entry = run_generation(source, config, k, out_dir, progress=progress)
        except DivergedError as exc:
            manifest["status"] = "failed"
            manifest["failure"] = {"generation": k, "step": exc.step, "message": f"failed at {gen_id(k)}: {exc}"}
            write_manifest(manifest, out_dir)
            raise
        manifest["generations"].append(entry)
        write_manifest(manifest, out_dir)
        source = load_corpus_dir(out_dir / entry["output_dir"], length=length)
    manifest["status"] = "complete"
    write_manifest(manifest, out_dir)
    return manifest
