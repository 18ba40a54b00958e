import subprocess

import pytest


def run_dataset_cli(*argv):
    """Invoke the dataset-producer CLI (external interface)."""
    proc = subprocess.run(["dppat", *argv], capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"dppat {' '.join(argv)} failed: {proc.stderr}")
    return proc.stdout


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small labeled dataset: 2 deep points x 8 systems, 12x30."""
    path = tmp_path_factory.mktemp("data") / "tiny.dpds"
    run_dataset_cli("gen", "--mode", "special-points",
                    "--points", "0.05:0.05,0.9:0.9", "--per-point", "8",
                    "--n", "12", "--t", "30", "--seed", "7",
                    "--out", str(path))
    return path
