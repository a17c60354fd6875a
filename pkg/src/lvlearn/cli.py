"""Command-line entry point: ``lvlearn <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .bayesnet import learn_bn_pipeline
from .decomp import decompose
from .errors import LVLearnError
from .hier import learn_hierarchy
from .metrics import dist, support_precision_recall, report_rows
from .model import HierarchicalModel, LatentLinearModel
from .moments import MomentSet, empirical_pairs
from .recovery import EPS_ZERO, alg1, alg1_proj
from .synth import (gen_bn_model, gen_hierarchical_model, sample_hierarchical,
                    sample_multi_view, sample_single_view)
from .verify import (EXPANSION_MAX_K, check_expansion, check_expansion_sampled,
                     check_genericity, falsify_thm2_conditions, row_gaps)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_matrix(path) -> np.ndarray:
    """CSV with a header row into a float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UsageError(f"{path}: expected a header and at least one data row")
    try:
        return np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def write_matrix(path, M, prefix="c"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{j}" for j in range(M.shape[1])])
        for row in M:
            w.writerow([repr(float(x)) for x in row])


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if hasattr(x, "to_dict"):
        return x.to_dict()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_model(path):
    d = json.loads(Path(path).read_text())
    if "matrices" in d:
        return HierarchicalModel.from_dict(d)
    return LatentLinearModel.from_dict(d)


def cmd_synth(args):
    if args.kind == "hier":
        model = gen_hierarchical_model(args.levels, args.p, args.gamma, args.seed)
    else:
        model = gen_bn_model(args.n, args.k, args.p, args.gamma, args.seed,
                             single_view=not args.multi_view)
    write_json(args.out_model, model.to_dict())
    if args.samples and args.N:
        if args.kind == "hier":
            X = sample_hierarchical(model, args.N, args.sample_seed)
        elif args.multi_view:
            X = sample_multi_view(model, args.N, args.sample_seed)
            X = X.reshape(args.N, -1)
        else:
            X = sample_single_view(model, args.N, args.sample_seed)
        write_matrix(args.samples, X, prefix="x")


def cmd_estimate(args):
    X = read_matrix(args.samples)
    ms = MomentSet.from_samples(X, center=not args.no_center)
    write_matrix(args.out, ms.pairs)
    if args.triples:
        zeta = read_matrix(args.triples).ravel()
        if zeta.size != X.shape[1]:
            raise UsageError("direction length does not match sample dimension")
        write_matrix(args.triples_out, ms.triples(zeta))


def cmd_decompose(args):
    C = read_matrix(args.pairs)
    out = decompose(C, args.k, args.trials, args.seed)
    d = _out_dir(args.out_dir)
    write_matrix(d / "lowrank.csv", out["lowrank"])
    write_matrix(d / "diag.csv", out["diag"][None, :])
    write_json(d / "partition.json", {"partition": out["partition"].to_dict(), "score": out["score"]})


def cmd_recover(args):
    P = read_matrix(args.pairs)
    fn = alg1 if args.variant == "alg1" else alg1_proj
    res = fn(P, args.k, args.eps_zero)
    d = _out_dir(args.out_dir)
    write_matrix(d / "A_hat.csv", res.A_hat)
    diag = {k: v for k, v in res.diagnostics.items() if k != "w"}
    diag.update(selection=res.selection, candidate_rows=res.candidate_rows)
    write_json(d / "diagnostics.json", diag)


def _momset_for(args, n_expected=None):
    if args.model:
        model = _load_model(args.model)
        return MomentSet.from_model(model), model
    if not args.samples:
        raise UsageError("need --samples or --model")
    return MomentSet.from_samples(read_matrix(args.samples)), None


def _sparsity_eps(args, from_samples):
    if args.eps_zero is not None:
        return args.eps_zero
    return experiments.FINITE_SAMPLE_SPARSITY_EPS if from_samples else EPS_ZERO


def cmd_learn_bn(args):
    ms, model = _momset_for(args)
    res = learn_bn_pipeline(ms, args.k, rng_seed=args.seed, eca=args.eca, variant=args.variant,
                            trials=args.trials, sparsity_eps=_sparsity_eps(args, model is None))
    d = _out_dir(args.out_dir)
    write_matrix(d / "A_hat.csv", res.A_hat)
    write_matrix(d / "lambda_hat.csv", res.lam_hat)
    write_json(d / "ordering.json", {"ordering": list(res.dag.ordering)})
    diag = {"approximate_ordering": res.approximate_ordering,
            "selection": res.recovery.selection}
    if "partition" in res.diagnostics:
        diag["partition"] = res.diagnostics["partition"].to_dict()
        diag["partition_score"] = res.diagnostics["partition_score"]
    if model is not None:
        diag["dist_A"] = dist(model.A, res.A_hat)
    write_json(d / "diagnostics.json", diag)


def cmd_learn_hier(args):
    if args.model:
        model = _load_model(args.model)
        if not isinstance(model, HierarchicalModel):
            raise UsageError("--model must describe a hierarchical model")
        C = model.level_covariances()[-1]
        levels = args.levels or model.levels
    else:
        if not args.samples or not args.levels:
            raise UsageError("need --samples and --levels (or --model)")
        C = empirical_pairs(read_matrix(args.samples))
        levels = args.levels
    res = learn_hierarchy(C, levels, args.seed, args.variant, args.trials, return_result=True,
                          sparsity_eps=_sparsity_eps(args, not args.model))
    d = _out_dir(args.out_dir)
    for i, A in enumerate(res.matrices, start=1):
        write_matrix(d / f"A_{i}.csv", A)
    write_matrix(d / "top_moment.csv", res.top_moment)


def cmd_verify(args):
    model = _load_model(args.model)
    mats = model.matrices if isinstance(model, HierarchicalModel) else [model.A]
    report = []
    for idx, A in enumerate(mats, start=1):
        entry = {"matrix": idx, "shape": list(A.shape)}
        supp = (A != 0).T
        if A.shape[1] <= EXPANSION_MAX_K:
            entry["expansion"] = check_expansion(supp)
        else:
            entry["expansion_sampled"] = check_expansion_sampled(supp, args.trials, args.seed)
        try:
            entry["genericity"] = check_genericity(A)
        except LVLearnError as exc:
            entry["genericity"] = {"skipped": str(exc)}
        rows = falsify_thm2_conditions(A, row_gaps(A), args.trials, args.seed)
        entry["recovery_conditions"] = {
            "violated_rows": [r["row"] for r in rows if r["status"] == "VIOLATED"],
            "rows": rows}
        report.append(entry)
    write_json(args.out, {"matrices": report})


def cmd_experiment(args):
    run = experiments.run_example1 if args.example == "example1" else experiments.run_example2
    report = run(args.config, preset=args.preset)
    written = experiments.write_report(report, args.out_dir)
    failed = [r for r in report["rows"] if r["error"]]
    sys.stderr.write(f"wrote {len(written)} files; {len(failed)} failed runs\n")


def cmd_metrics(args):
    A, B = read_matrix(args.true), read_matrix(args.est)
    p, r = support_precision_recall(A, B, args.eps_zero)
    rows = report_rows({"dist": dist(A, B), "precision": p, "recall": r},
                       {"eps_zero": args.eps_zero, "true": str(args.true), "est": str(args.est)})
    write_json(args.out, rows)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lvlearn", description="Learn latent linear models from moments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a model JSON and optional sample CSV")
    p.add_argument("--kind", choices=["bn", "hier"], default="bn")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--levels", type=int, nargs="+", default=[3, 12, 40])
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multi-view", action="store_true")
    p.add_argument("--N", type=int, default=0)
    p.add_argument("--sample-seed", type=int, default=1)
    p.add_argument("--out-model", default="-")
    p.add_argument("--samples")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="second moment (and a third-moment slice) from samples")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", default="pairs.csv")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--triples", help="CSV holding one direction zeta")
    p.add_argument("--triples-out", default="triples.csv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("decompose", help="low-rank plus diagonal split")
    p.add_argument("--pairs", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("recover", help="columns of A from a (denoised) second moment")
    p.add_argument("--pairs", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--variant", choices=["alg1", "alg1proj"], default="alg1")
    p.add_argument("--eps-zero", type=float, default=1e-6)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("learn-bn", help="A and the hidden DAG from samples or a model")
    p.add_argument("--samples")
    p.add_argument("--model", help="model JSON; uses exact moments")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eca", choices=["svd", "power"], default="power")
    p.add_argument("--variant", choices=["alg1", "alg1proj"], default="alg1proj")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--eps-zero", type=float, default=None,
                   help="sparsity threshold; defaults to 1e-6 for --model, 1e-2 for --samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_learn_bn)

    p = sub.add_parser("learn-hier", help="peel a hierarchical model level by level")
    p.add_argument("--samples")
    p.add_argument("--model", help="hierarchical model JSON; uses exact moments")
    p.add_argument("--levels", type=int, nargs="+")
    p.add_argument("--variant", choices=["alg1", "alg1proj"], default="alg1proj")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--eps-zero", type=float, default=None,
                   help="sparsity threshold; defaults to 1e-6 for --model, 1e-2 for --samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_learn_hier)

    p = sub.add_parser("verify", help="check identifiability conditions of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="run a simulation study")
    p.add_argument("example", choices=["example1", "example2"])
    p.add_argument("--config", help="JSON overrides for the preset")
    p.add_argument("--preset", choices=["reduced", "full"], default="reduced")
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("metrics", help="dist, precision and recall of an estimate")
    p.add_argument("--true", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--eps-zero", type=float, default=1e-6)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"lvlearn: usage error: {exc}\n")
        return 1
    except (LVLearnError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"lvlearn: stage failure: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
