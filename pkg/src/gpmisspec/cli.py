"""Command-line interface: ``gpmisspec {simulate,fit,experiment,report}``.

Settings come from built-in defaults, then an optional JSON config file
(``--config``), then command-line flags, later sources winning.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .covkernel import MaternSpec, ParamBox
from .criteria import TruthSpec
from .estimators import ObjectiveFailure, OptimizerConfig, fit
from .montecarlo import ESTIMATORS, QUANTITIES, Scenario, run_experiment, simulate_dataset
from . import reporting

log = logging.getLogger("gpmisspec")


class UsageError(Exception):
    pass


def _default_workers():
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    n: int = 100
    d: int = 1
    n_reps: int = 1000
    master_seed: int = 20160701
    truth: dict = field(default_factory=lambda: {"sigma2": 1.0, "ell": 3.0, "nu": 10.0, "delta": 0.0625})
    model_nu: float = 10.0
    specifications: dict = field(default_factory=lambda: {"well-specified": 0.0625, "misspecified": 0.01})
    box: dict = field(default_factory=lambda: {"sigma2_range": [0.01, 100.0], "ell_range": [0.2, 10.0]})
    optimizer: dict = field(default_factory=lambda: OptimizerConfig().to_dict())
    quadrature: dict = field(default_factory=lambda: {"m": 2000, "origin": "iid-uniform"})
    shared_data: bool = False
    hist_bins: int = 30
    workers: int = field(default_factory=_default_workers)
    out: str = "results"
    formats: list = field(default_factory=lambda: ["csv", "json"])

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def validate(self):
        try:
            self.scenarios()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
        if not self.specifications:
            raise UsageError("at least one specification is required")
        if self.workers < 1 or self.hist_bins < 1:
            raise UsageError("workers and hist_bins must be >= 1")
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise UsageError(f"unknown output formats {sorted(bad)}")

    def truth_spec(self):
        return TruthSpec(MaternSpec(**self.truth))

    def param_box(self):
        return ParamBox(tuple(self.box["sigma2_range"]), tuple(self.box["ell_range"]))

    def scenario(self, model_delta):
        return Scenario(
            truth=self.truth_spec(),
            model_nu=float(self.model_nu),
            model_delta=float(model_delta),
            box=self.param_box(),
            n=int(self.n),
            n_reps=int(self.n_reps),
            quad_m=int(self.quadrature["m"]),
            quad_origin=self.quadrature.get("origin", "iid-uniform"),
            master_seed=int(self.master_seed),
            d=int(self.d),
            optimizer=OptimizerConfig(**self.optimizer),
            shared_data=bool(self.shared_data),
        )

    def scenarios(self):
        """``[(specification name, Scenario)]`` in config order."""
        return [(name, self.scenario(delta)) for name, delta in self.specifications.items()]


def load_config(path=None, overrides=None):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    base = RunConfig().to_dict()
    for key, value in data.items():
        # nested sections merge key by key; specifications are replaced whole
        if isinstance(value, dict) and isinstance(base.get(key), dict) and key != "specifications":
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    base.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(base)


def cmd_simulate(config, path, rep_index=0):
    """Write one replication's design and observations to ``path``."""
    _, scenario = config.scenarios()[0]
    data = simulate_dataset(scenario, rep_index)
    return reporting.write_dataset(path, data)


def cmd_fit(config, dataset_path, method, specification=None, delta=None):
    if method not in ("ml", "cv"):
        raise UsageError(f"method must be ml or cv, got {method!r}")
    data = reporting.read_dataset(dataset_path)
    if method == "cv" and data.n < 2:
        raise UsageError("cv needs at least 2 observations")
    if delta is None:
        name = specification or next(iter(config.specifications))
        if name not in config.specifications:
            raise UsageError(f"unknown specification {name!r}")
        delta = config.specifications[name]
    res = fit(data, method, config.model_nu, delta, config.param_box(), OptimizerConfig(**config.optimizer))
    return {
        "method": method,
        "sigma2_hat": res.sigma2,
        "ell_hat": res.ell,
        "criterion": res.criterion_value,
        "evals": res.evaluations,
        "converged": res.converged,
    }


def cmd_experiment(config):
    """Run every configured specification and write the report files.

    Files written on a failed run are removed again.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        groups, rows, hist_groups, summary = [], [], [], {"failures": {}, "aggregates": {}}
        for name, scenario in config.scenarios():
            log.info("running %s, n=%d, %d replications", name, scenario.n, scenario.n_reps)
            report = run_experiment(scenario, workers=config.workers, bins=config.hist_bins)
            groups.append((scenario.n, name, scenario.model_delta, report.records))
            rows.extend(reporting.table_rows(scenario.n, name, report.aggregates))
            hist_groups.append((scenario.n, name, report.histograms))
            summary["failures"][name] = [list(f) for f in report.failures]
            summary["aggregates"][name] = report.aggregates
        if "csv" in config.formats:
            written += [out / "replications.csv", out / "table1.csv"]
            written += [out / f"hist_{q}_{e}.csv" for q in QUANTITIES for e in ESTIMATORS]
            reporting.write_replications(out / "replications.csv", groups)
            reporting.write_table(out / "table1.csv", rows)
            reporting.write_histograms(out, hist_groups)
        if "json" in config.formats:
            summary["config"] = config.to_dict()
            written.append(out / "summary.json")
            (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return written
    except BaseException:
        for p in written:
            Path(p).unlink(missing_ok=True)
        raise


def cmd_report(out_dir, bins=30):
    path = Path(out_dir) / "replications.csv"
    if not path.exists():
        raise UsageError(f"{path} does not exist")
    return reporting.reaggregate(out_dir, bins)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, dest="master_seed", help="master seed")
    common.add_argument("--n", type=int, help="number of observation points")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gpmisspec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate one dataset")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--rep", type=int, default=0, help="replication index")

    f = sub.add_parser("fit", parents=[common], help="fit a dataset by ml or cv")
    f.add_argument("dataset")
    f.add_argument("--method", choices=["ml", "cv"], required=True)
    g = f.add_mutually_exclusive_group()
    g.add_argument("--specification", help="named model nugget from the config")
    g.add_argument("--delta", type=float, help="model nugget variance")
    f.add_argument("--out", help="write the JSON report here instead of stdout")

    e = sub.add_parser("experiment", parents=[common], help="run the Monte Carlo study")
    e.add_argument("--out", help="output directory")
    e.add_argument("--workers", type=int)
    e.add_argument("--n-reps", type=int, dest="n_reps")
    e.add_argument("--emit-config", action="store_true", help="print the effective config and exit")

    r = sub.add_parser("report", parents=[common], help="re-aggregate replications.csv")
    r.add_argument("dir")
    r.add_argument("--bins", type=int)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {"master_seed": args.master_seed, "n": args.n}
    if args.command == "experiment":
        overrides.update(out=args.out, workers=args.workers, n_reps=args.n_reps)
    try:
        config = load_config(args.config, overrides)
        if args.command == "simulate":
            print(cmd_simulate(config, args.out, args.rep))
        elif args.command == "fit":
            rep = json.dumps(cmd_fit(config, args.dataset, args.method, args.specification, args.delta), indent=2)
            if args.out:
                Path(args.out).write_text(rep + "\n")
            else:
                print(rep)
        elif args.command == "experiment":
            if args.emit_config:
                print(config.dumps())
                return 0
            for p in cmd_experiment(config):
                print(p)
        elif args.command == "report":
            for p in cmd_report(args.dir, args.bins or config.hist_bins):
                print(p)
    except UsageError as exc:
        print(f"gpmisspec: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ObjectiveFailure, RuntimeError, ArithmeticError) as exc:
        print(f"gpmisspec: failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
