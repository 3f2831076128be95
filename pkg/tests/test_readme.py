import os
import re
import shutil
import subprocess
import sys

import pytest

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def readme_commands():
    text = open(os.path.join(REPO, "README.md"), encoding="utf-8").read()
    commands = []
    for block in re.findall(r"```\n(.*?)```", text, flags=re.S):
        for line in block.splitlines():
            line = line.strip()
            if line.startswith(("qmesh ", "qmesh-plots ")):
                commands.append(line)
    return commands


def test_every_readme_command_runs(tmp_path):
    # commands run in order inside a scratch directory so later ones can
    # consume earlier outputs (the plots examples read sweep/windows CSVs)
    commands = readme_commands()
    assert len(commands) >= 7
    shutil.copytree(os.path.join(REPO, "configs"), str(tmp_path / "configs"))
    env = dict(os.environ, QMESH_OUT_DIR=str(tmp_path))
    for command in commands:
        argv = command.split()
        module = "qmesh.cli" if argv[0] == "qmesh" else "qmesh_plots.cli"
        proc = subprocess.run(
            [sys.executable, "-m", module, *argv[1:]],
            cwd=str(tmp_path), env=env, capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, f"{command!r} failed:\n{proc.stderr}"
