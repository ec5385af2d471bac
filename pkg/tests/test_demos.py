import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = sorted((Path(__file__).parent.parent / "demos").glob("*.py"))


@pytest.mark.parametrize("path", DEMOS, ids=[p.stem for p in DEMOS])
def test_demo_runs(path):
    r = subprocess.run([sys.executable, str(path)], capture_output=True, text=True, timeout=60)
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip()


def test_freeze_tool_is_idempotent(tmp_path):
    from thingmachine import corpus
    before = {p: p.read_bytes() for p in corpus.corpus_dir().rglob("*") if p.is_file()
              and "__pycache__" not in p.parts}
    tool = Path(__file__).parent.parent / "tools" / "freeze_corpus.py"
    subprocess.run([sys.executable, str(tool)], check=True, capture_output=True)
    after = {p: p.read_bytes() for p in before}
    assert after == before
