import json

import numpy as np
import pytest

from soundchain import gan, lineage
from soundchain.corpus import WaveformClip, load_corpus_dir
from soundchain.errors import ConfigError, DivergedError, EmptyCorpus, ResumeError

TINY_GAN = gan.GanConfig(latent_dim=8, output_len=256, model_dim=2, n_layers=2, batch_size=4,
                         critic_iters=2, total_steps=3, checkpoint_every=2)
CFG = lineage.LineageConfig(gan=TINY_GAN, n_generations=3, n_generate=12, master_seed=5)


def tiny_corpus(n=16, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(256)
    clips = []
    for i in range(n):
        k = rng.choice([8, 24])
        x = 0.8 * np.sin(2 * np.pi * k * t / 256 + rng.uniform(0, 6.3)) * np.hanning(256)
        clips.append(WaveformClip(x, id=f"c{i:05d}"))
    return clips


class Interrupt(Exception):
    pass


def test_single_generation_entry(tmp_path):
    entry = lineage.run_generation(tiny_corpus(), CFG, 1, tmp_path)
    assert entry["source"] == "corpus" and entry["n_generated"] == 12
    assert entry["n_training_items"] == 16 and entry["total_steps"] == 3
    root = tmp_path / "gen1"
    assert (root / "checkpoints" / "final.npz").exists()
    assert (root / "metrics.csv").exists()
    assert len(list((root / "outputs").glob("*.wav"))) == 12


def test_generation_preconditions(tmp_path):
    with pytest.raises(ConfigError):
        lineage.run_generation(tiny_corpus(), lineage.LineageConfig(gan=TINY_GAN, n_generate=0), 1, tmp_path)
    with pytest.raises(EmptyCorpus):
        lineage.run_generation([], CFG, 1, tmp_path)
    with pytest.raises(ConfigError):
        lineage.run_generation(tiny_corpus(), CFG, 0, tmp_path)
    with pytest.raises(ConfigError):
        lineage.run_lineage(tiny_corpus(), lineage.LineageConfig(gan=TINY_GAN, n_generations=0), tmp_path)


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    out = tmp_path_factory.mktemp("chain")
    return out, lineage.run_lineage(tiny_corpus(), CFG, out)


def test_chain_structure(chain):
    out, man = chain
    assert man["schema_version"] == lineage.SCHEMA_VERSION and man["status"] == "complete"
    gens = man["generations"]
    assert [g["source"] for g in gens] == ["corpus", "gen1", "gen2"]
    for a, b in zip(gens, gens[1:]):
        assert a["n_generated"] == b["n_training_items"]
        assert a["outputs_hash"] == b["source_hash"]
        assert a["generated_ids_hash"] == b["training_ids_hash"]
    assert json.loads((out / "lineage.json").read_text()) == man


def test_chain_integrity_from_disk(chain):
    out, man = chain
    for prev, cur in zip(man["generations"], man["generations"][1:]):
        ids = {c.id for c in load_corpus_dir(out / prev["output_dir"], length=256)}
        assert lineage.ids_hash(ids) == cur["training_ids_hash"]


def test_fresh_initialisation_per_generation(chain):
    _, man = chain
    gens = man["generations"]
    assert len({g["rng_seed"] for g in gens}) == len(gens)
    for prev, cur in zip(gens, gens[1:]):
        assert cur["init_generator_hash"] != prev["final_generator_hash"]
        assert cur["init_generator_hash"] != prev["init_generator_hash"]


def test_lineage_deterministic(chain, tmp_path):
    out, man = chain
    again = lineage.run_lineage(tiny_corpus(), CFG, tmp_path)
    assert (tmp_path / "lineage.json").read_bytes() == (out / "lineage.json").read_bytes()
    for g in again["generations"]:
        assert (tmp_path / g["metrics"]).read_bytes() == (out / g["metrics"]).read_bytes()


def test_resume_after_interrupt(chain, tmp_path):
    ref_dir, ref = chain

    def bomb(k, total, m):
        if k == 3:
            raise Interrupt

    with pytest.raises(Interrupt):
        lineage.run_lineage(tiny_corpus(), CFG, tmp_path, progress=bomb)
    partial = lineage.read_manifest(tmp_path)
    assert [g["id"] for g in partial["generations"]] == ["gen1", "gen2"]
    before = {p: p.stat().st_mtime_ns for p in (tmp_path / "gen1").rglob("*") if p.is_file()}
    seen = []
    man = lineage.run_lineage(tiny_corpus(), CFG, tmp_path, progress=lambda k, t, m: seen.append(k))
    assert set(seen) == {3}
    assert before == {p: p.stat().st_mtime_ns for p in (tmp_path / "gen1").rglob("*") if p.is_file()}
    assert man == ref
    assert (tmp_path / "lineage.json").read_bytes() == (ref_dir / "lineage.json").read_bytes()


def test_resume_extends_chain(tmp_path):
    short = lineage.LineageConfig(gan=TINY_GAN, n_generations=1, n_generate=12, master_seed=5)
    lineage.run_lineage(tiny_corpus(), short, tmp_path)
    seen = []
    man = lineage.run_lineage(tiny_corpus(), CFG, tmp_path, progress=lambda k, t, m: seen.append(k))
    assert len(man["generations"]) == 3 and 1 not in seen


def test_resume_corrupt_checkpoint_names_generation(chain, tmp_path):
    import shutil
    out, _ = chain
    shutil.copytree(out, tmp_path / "copy")
    ck = tmp_path / "copy" / "gen2" / "checkpoints" / "final.npz"
    ck.write_bytes(ck.read_bytes()[:100])
    with pytest.raises(ResumeError) as ei:
        lineage.run_lineage(tiny_corpus(), CFG, tmp_path / "copy")
    assert ei.value.generation == 2 and "gen2" in str(ei.value)


def test_resume_rejects_other_config(chain, tmp_path):
    import shutil
    out, _ = chain
    shutil.copytree(out, tmp_path / "copy")
    other = lineage.LineageConfig(gan=TINY_GAN, n_generations=3, n_generate=12, master_seed=6)
    with pytest.raises(ResumeError):
        lineage.run_lineage(tiny_corpus(), other, tmp_path / "copy")
    with pytest.raises(ConfigError):
        lineage.run_lineage(tiny_corpus(), CFG, tmp_path / "copy", resume=False)


def test_divergence_marks_manifest(tmp_path):
    clips = tiny_corpus()
    clips[3].samples[10] = np.nan
    with pytest.raises(DivergedError) as ei:
        lineage.run_lineage(clips, CFG, tmp_path)
    assert ei.value.generation == 1
    man = lineage.read_manifest(tmp_path)
    assert man["status"] == "failed" and man["failure"]["generation"] == 1
    assert "gen1" in man["failure"]["message"]
    assert (tmp_path / "gen1" / "checkpoints" / "last_good.npz").exists()


def test_published_scale_ledger():
    cfg = lineage.LineageConfig(n_generations=4, n_generate=5700,
                                steps_per_generation=(12255, 12239, 12249, 12246))
    rows = lineage.plan_lineage(cfg, corpus_size=5463)
    assert [r["total_steps"] for r in rows] == [12255, 12239, 12249, 12246]
    assert [r["n_training_items"] for r in rows] == [5463, 5700, 5700, 5700]
    assert [r["source"] for r in rows] == ["corpus", "gen1", "gen2", "gen3"]
    assert [r["epochs"] for r in rows] == [717, 687, 687, 687]
    assert all(r["n_generated"] == 5700 for r in rows)


def test_generation_seeds_independent():
    seeds = {lineage.generation_seed(m, k) for m in range(5) for k in range(1, 6)}
    assert len(seeds) == 25
