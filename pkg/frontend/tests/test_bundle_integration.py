"""End-to-end: render figures from a bundle produced by the simulation CLI."""
import os
import shutil
import subprocess
import sys

import pytest

from plotkit import ReportBundle, render_report
from plotkit.render import FIGURES

CONFIG = """
[env]
app = point
feature_count = 8
steps = 40
seed = 2

[noise]
sigma_w1 = 0.003
sigma_w2 = 0.01
sigma_v = 0.1

[run]
runs = 2
seed = 5
variants = std,ri,affv1,ideal
"""


@pytest.fixture(scope="module")
def cli_bundle(tmp_path_factory):
    if shutil.which("affekf") is None:
        pytest.skip("simulation CLI not installed")
    root = tmp_path_factory.mktemp("bundle")
    cfg = root / "point.cfg"
    cfg.write_text(CONFIG)
    out = root / "report"
    proc = subprocess.run(
        ["affekf", "montecarlo", "--config", str(cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out


def test_render_cli_bundle(cli_bundle, tmp_path):
    out = tmp_path / "figs"
    files = render_report(ReportBundle(str(cli_bundle)), str(out))
    assert sorted(os.path.basename(f) for f in files) == sorted(FIGURES)
    for f in files:
        assert os.path.getsize(f) > 1000


def test_cli_render_on_cli_bundle(cli_bundle, tmp_path):
    out = tmp_path / "cli_figs"
    proc = subprocess.run(
        [sys.executable, "-m", "plotkit.cli", "render", str(cli_bundle), str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert sorted(os.listdir(out)) == sorted(FIGURES)
