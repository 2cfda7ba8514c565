import shutil
import subprocess
from pathlib import Path


def pytest_configure(config):
    # the bundled solver wrapper needs its npm deps exactly once
    solver_dir = Path(__file__).resolve().parents[1] / "src" / "probfp" / "solver"
    if (solver_dir / "package.json").exists() and not (solver_dir / "node_modules").exists():
        if shutil.which("npm"):
            subprocess.run(["npm", "install", "--no-audit", "--no-fund"],
                           cwd=solver_dir, check=False, capture_output=True)
