#!/usr/bin/env python3
"""Export frontend fixtures from the analysis code.

Writes the panel's default configuration module and the canned service
responses the UI tests compare against byte-for-byte.  The tune fixture is
exactly what `pdhlock tune --config fixtures/config3.json --json` prints,
which the service test suite proves is byte-identical to POST /tune.

Run from the repository root:  python scripts/export_ui_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from pdhlock.analysis import evaluate_project, tune_result_to_dict
from pdhlock.config import load_project, project_from_dict, project_to_dict
from pdhlock.serialize import dumps_canonical
from pdhlock.tuning import autotune_fast

ROOT = Path(__file__).resolve().parent.parent
FRONTEND = ROOT / "frontend"


def main() -> None:
    config_doc = project_to_dict(load_project(ROOT / "fixtures" / "config3.json"))
    # The UI never reads measurement files; drop the file references.
    config_doc["traces"] = {}
    pc = project_from_dict(config_doc)

    fixtures = FRONTEND / "fixtures"
    fixtures.mkdir(exist_ok=True)
    (fixtures / "config3.json").write_text(dumps_canonical(config_doc), encoding="utf-8")

    (fixtures / "evaluate_config3.json").write_text(
        dumps_canonical(evaluate_project(pc)), encoding="utf-8"
    )

    tune_doc = tune_result_to_dict(autotune_fast(pc.loop))
    (fixtures / "tune_config3.json").write_text(dumps_canonical(tune_doc), encoding="utf-8")

    default_ts = FRONTEND / "src" / "default_config.ts"
    default_ts.write_text(
        "/** Generated by scripts/export_ui_fixtures.py; do not edit by hand. */\n\n"
        "import type { ProjectConfig } from \"./types.js\";\n\n"
        f"export const DEFAULT_CONFIG: ProjectConfig = {json.dumps(json.loads(dumps_canonical(config_doc)), indent=2)};\n",
        encoding="utf-8",
    )
    print(f"wrote {fixtures} and {default_ts}")


if __name__ == "__main__":
    main()
