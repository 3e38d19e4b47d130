"""Record measured regression baselines (not oracles) for the acceptance suite."""
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))
from acceptance_setup import cz_case, domination_runs  # noqa: E402

doc = {
    "czd_probe_ratio": [cz_case(seed).report["probe_ratio"] for seed in range(20)],
    "domination_ratio": [base.ratio for base, _, _ in domination_runs(floors=())],
}
out = pathlib.Path(__file__).with_name("baselines.json")
out.write_text(json.dumps(doc, indent=2) + "\n")
print(doc)
