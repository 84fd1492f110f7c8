"""Accuracy against epsilon_d for several values of one detector parameter.

Example, the validation radius on the synthetic funnel:

    python3 scripts/sweep_parameters.py --param sigma_r --values 10,20,30,40,60

Each value produces one block of rows in ``sweep.csv``
(``param,value,epsilon,tp,fp,tn,fn,accuracy``).
"""

import argparse
import csv
import dataclasses
from pathlib import Path

import numpy as np

from lagrangian_bottleneck import BottleneckDetector, PipelineConfig
from lagrangian_bottleneck.evaluate import accuracy_sweep
from lagrangian_bottleneck.synth import Scenario, ground_truth, sequences

NUMERIC = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def run_one(config, scene):
    gt = ground_truth(scene, config.delta_t, config.tau_s, config.sigma_o)
    fwd, bwd = sequences(scene, config.delta_t)
    results = list(BottleneckDetector(config).run(fwd, bwd))
    frames = [r.frame for r in results if r.evaluated]
    confirmed = {r.frame: r.confirmed for r in results if r.confirmed}
    return accuracy_sweep(confirmed, gt, np.round(np.arange(0, 3.01, 0.25), 2), frames)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--param", default="sigma_r")
    p.add_argument("--values", default="10,20,30,40,60")
    p.add_argument("--onset", type=int, default=100)
    p.add_argument("--out", default="runs/sweep.csv")
    args = p.parse_args(argv)
    if args.param not in NUMERIC:
        p.error(f"unknown parameter {args.param!r}")
    cast = int if "int" in str(NUMERIC[args.param]) else float

    scene = Scenario("funnel", onset_frame=args.onset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "epsilon", "tp", "fp", "tn", "fn", "accuracy"])
        for raw in args.values.split(","):
            value = cast(raw)
            config = dataclasses.replace(PipelineConfig(), **{args.param: value}).validate()
            report = run_one(config, scene)
            for row in report.rows:
                w.writerow([args.param, value, row.epsilon, row.tp, row.fp, row.tn, row.fn,
                            f"{row.accuracy:.4f}"])
            print(f"{args.param}={value}: accuracy@1.0 = {report.accuracy_at(1.0):.3f}")


if __name__ == "__main__":
    main()
