"""anomgen command line: simulate -> train/fit -> generate -> verify ->
categorize -> cluster -> report.

Every subcommand writes outputs atomically and prints a single machine-
readable JSON summary line to stdout.  Generation fans independent runs over
a worker pool; records depend only on (master seed, run index), so outputs
are byte-identical for any worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, records
from .adversarial import GdaConfig, run_adversarial_index
from .basis import basis_from_config
from .categorize import categorize
from .config import ConfigError, PipelineConfig, build_predictor, load_config, parse_config
from .cpt import CptParams, simulate_choices
from .data import load_dataset, save_dataset
from .lotteries import Menu, run_rng, sample_random_menu
from .morphing import MorphConfig, run_morph_index
from .predictor import (MlpPredictor, MlpTrainConfig, evaluate, fit_cpt_params,
                        train_mlp)
from .verifier import minimal_anomaly, verify_collection, verify_parametrized


def _summary(**kwargs) -> int:
    print(json.dumps(kwargs, sort_keys=True))
    return 0


def _read_raw_config(path) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    elif os.environ.get("ANOMGEN_WORKERS"):
        cfg.workers = int(os.environ["ANOMGEN_WORKERS"])
    return cfg


def _gda_config(cfg: PipelineConfig) -> GdaConfig:
    a = cfg.adversarial
    return GdaConfig(step_size=a.step_size, max_iters=a.max_iters,
                     basis_config=a.basis, objective=a.objective,
                     ascent_coords=a.ascent_coords,
                     collection_mode=a.collection_mode, free_size=a.free_size,
                     n_payoffs=cfg.n_payoffs, seed=cfg.seed)


def _morph_config(cfg: PipelineConfig) -> MorphConfig:
    m = cfg.morph
    return MorphConfig(step_size=m.step_size, max_iters=m.max_iters,
                       n_gradient_samples=m.n_gradient_samples,
                       rank_tol=m.rank_tol, basis_config=m.basis,
                       n_payoffs=cfg.n_payoffs, seed=cfg.seed)


# -- generation workers (module level for pickling) -------------------------

def _generate_chunk(raw_config: dict, procedure: str, seed: int, indices):
    cfg = parse_config(raw_config)
    predictor = build_predictor(cfg.predictor)
    out = []
    for i in indices:
        if procedure == "adversarial":
            result = run_adversarial_index(predictor, _gda_config(cfg), seed, i)
            coll = result.candidate
        elif procedure == "morph":
            result = run_morph_index(predictor, _morph_config(cfg), seed, i)
            coll = result.candidate
        else:
            rng = run_rng(seed, i)
            domain = tuple(cfg.theory_basis.get("domain", (0.0, 10.0)))
            menus = [sample_random_menu(rng, cfg.n_payoffs, *domain) for _ in range(2)]
            from .lotteries import Example, ExampleCollection
            coll = ExampleCollection(
                tuple(Example(m, predictor.predict(m)) for m in menus),
                {"procedure": "baseline", "master_seed": seed, "run_index": i})
        record = records.candidate_to_record(coll)
        record["predictor"] = getattr(predictor, "label", None)
        out.append((i, record))
    return out


def _run_generation(args, procedure: str) -> int:
    cfg = _config_from_args(args)
    inits = args.inits if args.inits is not None else (
        cfg.adversarial.inits if procedure == "adversarial" else cfg.morph.inits)
    if inits < 1:
        raise ConfigError("need at least one initialization (--inits >= 1)")
    raw = _read_raw_config(args.config)
    seed = cfg.seed
    indices = list(range(inits))
    if cfg.workers > 1:
        chunks = [indices[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_generate_chunk, *zip(*[(raw, procedure, seed, ch)
                                                     for ch in chunks]))
            collected = [item for part in parts for item in part]
    else:
        collected = _generate_chunk(raw, procedure, seed, indices)
    collected.sort(key=lambda t: t[0])
    recs = [r for _, r in collected]
    records.write_jsonl(args.out, recs, kind="candidates")
    return _summary(command=procedure, runs=inits, seed=seed, out=args.out,
                    workers=cfg.workers)


# -- verification / categorization ------------------------------------------

def _verify_chunk(raw_config: dict, recs):
    cfg = parse_config(raw_config)
    basis = basis_from_config(cfg.theory_basis)
    out = []
    for idx, rec in recs:
        coll = records.record_to_collection(rec)
        pv = verify_parametrized(basis, coll, cfg.kl_threshold)
        av = verify_collection(coll, cfg.margin_threshold)
        rec = dict(rec)
        rec["min_kl"] = float(pv.min_kl)
        rec["parametrized_inconsistent"] = bool(pv.inconsistent)
        rec["any_utility_inconsistent"] = bool(not av.consistent)
        rec["margin"] = float(av.margin)
        rec["witness"] = None if av.witness_utility is None else \
            [float(u) for u in av.witness_utility]
        if not av.consistent:
            minimal = minimal_anomaly(coll)
            rec["anomaly_minimal_indices"] = list(minimal[0]) if minimal else None
        else:
            rec["anomaly_minimal_indices"] = None
        out.append((idx, rec))
    return out


def cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    raw = _read_raw_config(args.config)
    _, recs = records.read_jsonl(args.inp)
    indexed = list(enumerate(recs))
    if cfg.workers > 1:
        chunks = [indexed[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_verify_chunk, *zip(*[(raw, ch) for ch in chunks]))
            collected = [item for part in parts for item in part]
    else:
        collected = _verify_chunk(raw, indexed)
    collected.sort(key=lambda t: t[0])
    out_recs = [r for _, r in collected]
    records.write_jsonl(args.out, out_recs, kind="verified")
    n_par = sum(r["parametrized_inconsistent"] for r in out_recs)
    n_full = sum(r["any_utility_inconsistent"] for r in out_recs)
    return _summary(command="verify", records=len(out_recs),
                    parametrized_inconsistent=n_par,
                    any_utility_inconsistent=n_full, out=args.out)


def cmd_categorize(args) -> int:
    _, recs = records.read_jsonl(args.inp, expected_kind="verified")
    out_recs = []
    counts: dict = {}
    for rec in recs:
        rec = dict(rec)
        if rec.get("any_utility_inconsistent"):
            coll = records.record_to_collection(rec)
            cat = categorize(coll)
            rec["category"] = {"tag": cat.tag, "certificate": cat.certificate}
            counts[cat.tag] = counts.get(cat.tag, 0) + 1
            if len(coll) == 2:
                rec["features"] = [float(v) for v in analysis.anomaly_features(coll)]
        out_recs.append(rec)
    records.write_jsonl(args.out, out_recs, kind="categorized")
    return _summary(command="categorize", records=len(out_recs),
                    category_counts=counts, out=args.out)


def cmd_cluster(args) -> int:
    _, recs = records.read_jsonl(args.inp, expected_kind="categorized")
    rows = [r for r in recs
            if r.get("any_utility_inconsistent") and r.get("features")
            and r.get("category", {}).get("tag") != "fosd"]
    if len(rows) < args.k:
        return _summary(command="cluster", error="fewer anomalies than clusters",
                        anomalies=len(rows))
    X = np.array([r["features"] for r in rows])
    Z = analysis.standardize(X)
    km = analysis.kmeans(Z, args.k, seed=args.seed or 0)
    pc = analysis.pca(X)
    out_rows = [(r["id"], int(km.assignments[i]),
                 repr(float(pc.scores[i, 0])), repr(float(pc.scores[i, 1])))
                for i, r in enumerate(rows)]
    records.write_csv(args.out, ("id", "cluster", "pc1", "pc2"), out_rows)
    loadings = [[(analysis.FEATURE_NAMES[j], round(v, 6)) for j, v in comp]
                for comp in pc.top_loadings[:2]]
    return _summary(command="cluster", anomalies=len(rows), k=args.k,
                    inertia=km.inertia,
                    explained_variance=[round(float(v), 6)
                                        for v in pc.explained_variance[:2]],
                    top_loadings=loadings, out=args.out)


def cmd_report(args) -> int:
    _, recs = records.read_jsonl(args.inp)
    predictors = sorted({str(r.get("predictor")) for r in recs})
    tags = ("dominated_consequence", "reverse_dominated_consequence",
            "strict_dominance", "fosd", "shared_component_reversal", "other")
    counts = {(t, p): 0 for t in tags for p in predictors}
    totals = dict.fromkeys(predictors, 0)
    for r in recs:
        if not r.get("any_utility_inconsistent"):
            continue
        p = str(r.get("predictor"))
        tag = r.get("category", {}).get("tag", "other")
        counts[(tag, p)] += 1
        totals[p] += 1
    rows = [[tag] + [counts[(tag, p)] for p in predictors] for tag in tags]
    rows.append(["total"] + [totals[p] for p in predictors])
    records.write_csv(args.out, ["category"] + predictors, rows)
    return _summary(command="report", records=len(recs),
                    anomalies=sum(totals.values()), out=args.out)


# -- data / model commands ---------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    pred_cfg = cfg.predictor
    if pred_cfg.delta is not None and pred_cfg.gamma is not None:
        params = CptParams(pred_cfg.delta, pred_cfg.gamma)
    else:
        params = CptParams.preset(pred_cfg.preset)
    rng = run_rng(cfg.seed, 0)
    domain = tuple(cfg.theory_basis.get("domain", (0.0, 10.0)))
    menus = [sample_random_menu(rng, cfg.n_payoffs, *domain) for _ in range(args.n)]
    ds = simulate_choices(rng, menus, params, kind=args.kind, count=args.count,
                          scale=pred_cfg.scale)
    save_dataset(ds, args.out)
    return _summary(command="simulate", rows=len(ds), kind=args.kind,
                    delta=params.delta, gamma=params.gamma, out=args.out)


def cmd_train_mlp(args) -> int:
    ds = load_dataset(args.inp, n_payoffs=args.n_payoffs)
    hidden = tuple(int(w) for w in args.hidden.split(",") if w)
    model = train_mlp(ds, hidden=hidden,
                      config=MlpTrainConfig(batch_size=args.batch_size,
                                            epochs=args.epochs,
                                            step_size=args.step_size,
                                            seed=args.seed or 0))
    model.save(args.out)
    metrics = evaluate(MlpPredictor(model), ds)
    return _summary(command="train-mlp", rows=len(ds), hidden=list(hidden),
                    train_mse=round(metrics["mse"], 6),
                    train_cross_entropy=round(metrics["cross_entropy"], 6),
                    out=args.out)


def cmd_fit_cpt(args) -> int:
    ds = load_dataset(args.inp, n_payoffs=args.n_payoffs)
    fit = fit_cpt_params(ds)
    if args.out:
        records.atomic_write_text(args.out, json.dumps(
            {"delta": fit.params.delta, "gamma": fit.params.gamma}, sort_keys=True) + "\n")
    return _summary(command="fit-cpt", rows=len(ds), delta=fit.params.delta,
                    gamma=fit.params.gamma,
                    cross_entropy=round(fit.cross_entropy, 6),
                    converged=fit.converged, out=args.out)


def cmd_epsilon(args) -> int:
    with open(args.freqs) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    header = lines[0].split(",")
    expected = ["pattern_00", "pattern_01", "pattern_10", "pattern_11"]
    if header[:4] != expected:
        raise ConfigError(f"{args.freqs}: expected columns {expected}")
    counts = tuple(float(v) for v in lines[1].split(",")[:4])
    freqs = analysis.PatternFrequencies(counts)
    with open(args.menus) as fh:
        menus = [Menu.from_json_dict(d) for d in json.load(fh)]
    fit = analysis.estimate_epsilon(freqs, menus=menus)
    return _summary(command="epsilon", epsilon=fit.epsilon,
                    weights={"".join(map(str, k)): round(v, 6)
                             for k, v in fit.weights.items()},
                    fit_distance=fit.fit_distance)


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anomgen",
                                     description="Anomaly generation for "
                                                 "expected utility theory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inp=False, out=True, config=True):
        if config:
            p.add_argument("--config", default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        if inp:
            p.add_argument("--in", dest="inp", required=True)
        if out:
            p.add_argument("--out", required=True)

    for name in ("adversarial", "morph", "baseline"):
        p = sub.add_parser(name, help=f"run the {name} generator")
        common(p)
        p.add_argument("--inits", type=int, default=None)

    p = sub.add_parser("verify", help="verify candidate collections")
    common(p, inp=True)

    p = sub.add_parser("categorize", help="categorize verified anomalies")
    common(p, inp=True, config=False)

    p = sub.add_parser("cluster", help="k-means + PCA over anomaly features")
    common(p, inp=True, config=False)
    p.add_argument("--k", type=int, default=4)

    p = sub.add_parser("report", help="category-count CSV")
    common(p, inp=True, config=False)

    p = sub.add_parser("simulate", help="simulate a choice dataset")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=("binary", "rate"), default="binary")
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("train-mlp", help="train the feedforward choice model")
    common(p, inp=True, config=False)
    p.add_argument("--hidden", default="32,32")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--step-size", type=float, default=0.5)
    p.add_argument("--n-payoffs", type=int, default=2)

    p = sub.add_parser("fit-cpt", help="fit probability-weighting parameters")
    common(p, inp=True, config=False, out=False)
    p.add_argument("--out", default=None)
    p.add_argument("--n-payoffs", type=int, default=2)

    p = sub.add_parser("epsilon", help="idiosyncratic-error estimate")
    p.add_argument("--freqs", required=True)
    p.add_argument("--menus", required=True)

    return parser


_DISPATCH = {
    "adversarial": lambda a: _run_generation(a, "adversarial"),
    "morph": lambda a: _run_generation(a, "morph"),
    "baseline": lambda a: _run_generation(a, "baseline"),
    "verify": cmd_verify,
    "categorize": cmd_categorize,
    "cluster": cmd_cluster,
    "report": cmd_report,
    "simulate": cmd_simulate,
    "train-mlp": cmd_train_mlp,
    "fit-cpt": cmd_fit_cpt,
    "epsilon": cmd_epsilon,
}


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(json.dumps({"command": args.command, "error": str(exc)}),
              file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
