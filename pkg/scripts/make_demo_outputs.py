"""Regenerate the checked-in demo_outputs/ tree from configs/demo.ini.

Every run is seeded, so the tree is reproducible byte for byte; rerun this
after changing the demo config or any output schema.
"""
import sys
from pathlib import Path

from logifv import cli

ROOT = Path(__file__).resolve().parent.parent
SEED = "20260819"


def main() -> int:
    config = ROOT / "configs" / "demo.ini"
    for command in ("simulate", "coalescent", "duality", "occupation"):
        out = ROOT / "demo_outputs" / command
        code = cli.run([command, "--config", str(config),
                        "--out", str(out), "--seed", SEED])
        if code != 0:
            print(f"{command} failed with exit code {code}", file=sys.stderr)
            return code
        print(f"{command}: wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
