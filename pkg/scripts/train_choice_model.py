#!/usr/bin/env python3
"""Train the feedforward choice model on simulated rates, then generate from it.

Mirrors the estimated-predictor workflow: simulate choice rates from a
weighting-function oracle, train the network, report held-out fit, and run a
small batch of both anomaly searches against the fitted model.
"""

import argparse

import numpy as np

from anomgen.adversarial import GdaConfig, run_adversarial_index
from anomgen.basis import basis_from_config
from anomgen.categorize import categorize
from anomgen.cpt import CptParams, simulate_choices
from anomgen.data import split_dataset
from anomgen.lotteries import sample_random_menu
from anomgen.morphing import MorphConfig, run_morph_index
from anomgen.predictor import MlpPredictor, MlpTrainConfig, evaluate, train_mlp
from anomgen.verifier import verify_collection, verify_parametrized


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--hidden", default="32,32")
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--runs", type=int, default=50, help="search runs per procedure")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = CptParams.preset("bruhin-b")
    rng = np.random.default_rng(args.seed)
    menus = [sample_random_menu(rng, 2, 0, 10) for _ in range(args.n)]
    ds = simulate_choices(rng, menus, params, kind="rate", count=1000)
    train, test = split_dataset(ds, 0.2, seed=args.seed)

    hidden = tuple(int(w) for w in args.hidden.split(","))
    model = train_mlp(train, hidden=hidden,
                      config=MlpTrainConfig(epochs=args.epochs, seed=args.seed))
    pred = MlpPredictor(model)
    print("held-out:", evaluate(pred, test))

    basis = basis_from_config({"kind": "polynomial", "order": 6,
                               "domain": [0.0, 10.0]})
    par = full = 0
    cats = {}
    for i in range(args.runs):
        for cand in (run_adversarial_index(pred, GdaConfig(seed=args.seed),
                                           args.seed, i).candidate,
                     run_morph_index(pred, MorphConfig(seed=args.seed),
                                     args.seed, i).candidate):
            par += verify_parametrized(basis, cand).inconsistent
            if not verify_collection(cand).consistent:
                full += 1
                tag = categorize(cand).tag
                cats[tag] = cats.get(tag, 0) + 1
    total = 2 * args.runs
    print(f"runs: {total}  parametrized-inconsistent: {par} ({par / total:.1%})  "
          f"fully verified: {full}  categories: {cats}")


if __name__ == "__main__":
    main()
