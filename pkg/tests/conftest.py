import json
import sys

import pytest

from soundchain.corpus import CorpusSpec, build_corpus, write_corpus_dir
from soundchain.lineage import MANIFEST_NAME, SCHEMA_VERSION, LineageConfig
from soundchain.pipeline import analyze_lineage


def write_fake_lineage(root, gens=2, n_tv=30, n_stv=10):
    """A lineage directory whose "generations" are full-length synthetic corpora.

    Training is skipped; only the parts ``analyze`` reads are written, so the
    analysis and report stages run on clips the annotator can measure.
    """
    corpus = root / "corpus"
    write_corpus_dir(build_corpus(CorpusSpec(n_tv=n_tv, n_stv=n_stv, seed=1))[0], corpus)
    entries = []
    for k in range(1, gens + 1):
        # later generations get longer #sTV aspiration, mimicking the drift
        spec = CorpusSpec(n_tv=n_tv, n_stv=n_stv, seed=1 + k, stv_vot_mean_ms=25.36 + 6 * k)
        write_corpus_dir(build_corpus(spec)[0], root / "lineage" / f"gen{k}" / "outputs")
        entries.append({"gen_index": k, "id": f"gen{k}", "status": "complete",
                        "output_dir": f"gen{k}/outputs"})
    manifest = {"schema_version": SCHEMA_VERSION, "status": "complete",
                "lineage_config": LineageConfig().to_dict(), "chain_hash": "fake",
                "run_config_hash": None, "corpus": {"path": str(corpus), "n_items": n_tv + n_stv, "hash": ""},
                "generations": entries, "failure": None}
    (root / "lineage" / MANIFEST_NAME).write_text(json.dumps(manifest))
    return root / "lineage", corpus


@pytest.fixture(scope="session")
def fake_lineage(tmp_path_factory):
    return write_fake_lineage(tmp_path_factory.mktemp("fake"))


@pytest.fixture(scope="session")
def analysis_dir(fake_lineage, tmp_path_factory):
    out = tmp_path_factory.mktemp("analysis")
    analyze_lineage(fake_lineage[0], out)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
