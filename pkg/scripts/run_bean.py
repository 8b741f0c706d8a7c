"""Run the bean experiment with scripts/configs/bean.yaml; extra flags go to the CLI."""
import os
import sys

from glcons.cli import run

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", os.path.join("results", "bean")]
    sys.exit(run(["bean", "--config", os.path.join(HERE, "configs", "bean.yaml"), *args]))
