import runpy
import sys
from pathlib import Path

import pytest

DEMOS = sorted((Path(__file__).resolve().parent.parent / "demos").glob("*.py"))
SLOW = {"04_train_spirals.py", "05_skip_connections.py"}


@pytest.mark.parametrize("path", [pytest.param(p, id=p.name,
                                               marks=[pytest.mark.slow] if p.name in SLOW else [])
                                  for p in DEMOS])
def test_demo_runs(path, monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", [str(path)])
    runpy.run_path(str(path), run_name="__main__")
    assert capsys.readouterr().out.strip()


def test_schedule_demo_writes_csv(monkeypatch, tmp_path, capsys):
    out = tmp_path / "fig.csv"
    monkeypatch.setattr(sys, "argv", ["01_schedules.py", str(out)])
    runpy.run_path(str(DEMOS[0]), run_name="__main__")
    assert len(out.read_text().splitlines()) == 5001
