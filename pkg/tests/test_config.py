import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundchain.config import RunConfig, StatsOptions, load_config, parse_config
from soundchain.errors import ConfigError


def test_empty_document_gives_defaults():
    assert parse_config("{}") == RunConfig()
    assert parse_config("") == RunConfig()
    assert load_config(None) == RunConfig()


def test_defaults_match_module_defaults():
    cfg = RunConfig()
    assert cfg.gan.model_dim == 16 and cfg.gan.total_steps == 2000
    assert cfg.lineage.n_generations == 4 and cfg.lineage.n_generate == 1000
    assert cfg.corpus.n_tv + cfg.corpus.n_stv == 1000
    assert cfg.stats == StatsOptions()


@settings(max_examples=40, deadline=None)
@given(steps=st.integers(0, 5000), dim=st.integers(1, 32), gens=st.integers(1, 8),
       seed=st.integers(0, 2**31), cap=st.one_of(st.none(), st.integers(0, 500)),
       alpha=st.floats(1e-6, 1e-2), adjust=st.sampled_from(["none", "bonferroni"]))
def test_round_trip(steps, dim, gens, seed, cap, alpha, adjust):
    data = {"gan": {"total_steps": steps, "model_dim": dim, "alpha": alpha},
            "lineage": {"n_generations": gens, "master_seed": seed},
            "stats": {"cap_tv": cap, "contrast_adjust": adjust}}
    cfg = RunConfig.from_dict(data)
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    assert again.hash() == cfg.hash()


def test_steps_per_generation_round_trip():
    cfg = RunConfig.from_dict({"lineage": {"steps_per_generation": [10, 20, 30, 40]}})
    assert cfg.lineage.steps_per_generation == (10, 20, 30, 40)
    assert parse_config(cfg.to_json()) == cfg
    assert cfg.lineage_config().steps_for(3) == 30


def test_vowel_set_round_trip():
    cfg = RunConfig.from_dict({"corpus": {"vowel_set": [[300, 2300, 3000], [700, 1200, 2500]]}})
    assert parse_config(cfg.to_json()) == cfg


@pytest.mark.parametrize("data", [
    {"network": {}},
    {"gan": {"modeldim": 16}},
    {"gan": {"model_dim": "16"}},
    {"gan": {"model_dim": 16.5}},
    {"gan": {"alpha": True}},
    {"lineage": {"record_wallclock": 1}},
    {"lineage": {"n_generations": 0}},
    {"lineage": {"steps_per_generation": [5]}},
    {"gan": {"output_len": 1000}},
    {"stats": {"contrast_adjust": "tukey"}},
    {"stats": {"cap_tv": -1}},
    {"corpus": {"n_tv": 0, "n_stv": 0}},
    {"gan": []},
    [],
])
def test_invalid_documents(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_invalid_json():
    with pytest.raises(ConfigError):
        parse_config("{gan: 1}")


def test_hash_tracks_every_section():
    base = RunConfig().hash()
    changed = {RunConfig.from_dict({s: d}).hash() for s, d in (
        ("corpus", {"seed": 1}), ("gan", {"seed": 1}), ("lineage", {"master_seed": 1}),
        ("analyzer", {"voicing_run": 4}), ("stats", {"threads": 2}))}
    assert base not in changed and len(changed) == 5


def test_replace_revalidates():
    cfg = RunConfig().replace("gan", total_steps=7)
    assert cfg.gan.total_steps == 7
    with pytest.raises(ConfigError):
        RunConfig().replace("lineage", n_generations=0)


def test_load_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"lineage": {"n_generate": 50}}))
    assert load_config(path).lineage.n_generate == 50
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_lineage_config_carries_settings():
    cfg = RunConfig.from_dict({"lineage": {"n_generations": 2, "master_seed": 9, "record_wallclock": True}})
    lc = cfg.lineage_config()
    assert (lc.n_generations, lc.master_seed, lc.record_wallclock) == (2, 9, True)
    assert lc.gan == cfg.gan
