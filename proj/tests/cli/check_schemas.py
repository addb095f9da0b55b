"""Runs every report type through the command line and validates it against the shipped schema."""

import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main(binary: str, schema_dir: str) -> int:
    schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in Path(schema_dir).glob("*.schema.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    rng = random.Random(7)
    tmp = Path(tempfile.mkdtemp(prefix="potpred_schema_"))
    exp = tmp / "exp.csv"
    exp.write_text("value\n" + "\n".join(repr(rng.expovariate(1.0)) for _ in range(4000)) + "\n")
    short = tmp / "short.csv"
    short.write_text("\n".join(repr(rng.betavariate(1.0, 3.0)) for _ in range(3000)) + "\n")
    heavy = tmp / "heavy.csv"
    heavy.write_text("\n".join(repr(rng.paretovariate(0.5)) for _ in range(3000)) + "\n")
    series = tmp / "series.csv"
    y, prev = [], 0.0
    for _ in range(2500):
        prev = 0.5 * prev + rng.paretovariate(3.0)
        y.append(prev)
    series.write_text("\n".join(repr(v) for v in y) + "\n")
    run_cfg = {"command": "risk", "input": str(exp), "k": 200, "tau_e": 0.999, "method": "pwm"}
    (tmp / "run.json").write_text(json.dumps(run_cfg))
    cov_cfg = {"experiment": "coverage", "generator": {"family": "exact-gp", "params": [0.25, 1.0]}, "n": 2000,
               "k": 100, "replications": 50, "methods": ["ml", "pwm"], "seed": 3}
    tail_cfg = {"experiment": "tail", "generator": {"family": "pareto", "params": [2.0]}, "n": 5000,
                "k": {"delta": 0.6}, "tau_star": 0.1, "replications": 50, "methods": ["ml"], "n_ladder": [5000, 10000]}
    con_cfg = {"experiment": "contraction", "generator": {"family": "exact-gp", "params": [0.25, 1.0]}, "n": 2000,
               "k": 100, "replications": 50, "methods": ["pwm"]}
    risk_cfg = {"experiment": "risk", "generator": {"family": "pareto", "params": [2.0]}, "n": 5000, "k": 200,
                "tau_star": 0.1, "replications": 50, "methods": ["ml"]}
    ts_cfg = {"experiment": "ts_coverage", "innovations": {"family": "pareto", "params": [2.0]}, "window": 1000, "stride": 1000,
              "origins": 50, "k": 50, "tau_e": 0.9875, "methods": ["pwm"]}
    configs = {}
    for name, cfg in [("cov", cov_cfg), ("tail", tail_cfg), ("con", con_cfg), ("risk", risk_cfg), ("ts", ts_cfg)]:
        path = tmp / f"{name}.json"
        path.write_text(json.dumps(cfg))
        configs[name] = str(path)
        jsonschema.validate(cfg, schemas["experiment_config"])
    jsonschema.validate(run_cfg, schemas["run_config"])

    bayes = ["--method", "bayes", "--draws", "1000", "--burn-in", "500"]
    cases = [
        ("fit", ["fit", "--input", str(exp), "--k", "200"]),
        ("fit", ["fit", "--input", str(exp), "--k", "200", "--method", "pwm"]),
        ("fit", ["fit", "--input", str(short), "--k", "200", *bayes]),
        ("predict", ["predict", "--input", str(short), "--k", "200", "--c", "3", "--grid", str(tmp / "g.csv")]),
        ("predict", ["predict", "--input", str(exp), "--return-period", "100", *bayes]),
        ("predict", ["predict", "--input", str(heavy), "--k", "200", "--tau-e", "0.999"]),
        ("risk", ["risk", "--input", str(exp), "--k", "200", "--tau-e", "0.999"]),
        ("risk", ["risk", "--input", str(heavy), "--k", "200", "--tau-e", "0.999"]),
        ("risk", ["risk", "--config", str(tmp / "run.json")]),
        ("ts", ["ts", "--input", str(series), "--window", "1000", "--stride", "500", "--k", "100", "--tau-e", "0.99"]),
        ("trace", ["trace", "--input", str(exp), "--k-min", "50", "--k-max", "300", "--k-step", "50"]),
        ("return_levels", ["return-levels", "--input", str(exp), "--k", "400", "--periods", "20,100,1000"]),
        ("simulate", ["simulate", "--config", configs["cov"]]),
        ("simulate", ["simulate", "--config", configs["tail"]]),
        ("simulate", ["simulate", "--config", configs["con"]]),
        ("simulate", ["simulate", "--config", configs["risk"]]),
        ("simulate", ["simulate", "--config", configs["ts"]]),
    ]
    failures = 0
    for schema, args in cases:
        proc = subprocess.run([binary, *args], capture_output=True, text=True)
        label = " ".join(args[:1] + args[2:])
        if proc.returncode != 0:
            print(f"FAIL {label}: exit {proc.returncode}: {proc.stderr.strip()}")
            failures += 1
            continue
        try:
            jsonschema.validate(json.loads(proc.stdout), schemas[schema])
            print(f"ok   {schema}: {label}")
        except jsonschema.ValidationError as e:
            print(f"FAIL {label}: {e.message} at {list(e.absolute_path)}")
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
