"""Run the cell experiment with scripts/configs/cell.yaml; extra flags go to the CLI."""
import os
import sys

from glcons.cli import run

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", os.path.join("results", "cell")]
    sys.exit(run(["cell", "--config", os.path.join(HERE, "configs", "cell.yaml"), *args]))
