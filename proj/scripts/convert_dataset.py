#!/usr/bin/env python3
"""Convert common graph-dataset formats into the specfil bundle layout.

A bundle directory contains:
    graph.json    {"name": str, "n": int, "d": int, "num_classes": int}
    edges.tsv     one undirected edge per line, "u<TAB>v" with u < v, 0-based
    features.tsv  n lines of d tab-separated reals
    labels.tsv    n lines, one integer each
    splits/split_<k>.json   {"train": [...], "val": [...], "test": [...]}

Two sources are supported:

  torch_geometric (needs the package + network access to fetch raw data):
      python scripts/convert_dataset.py tg cora out/cora
      python scripts/convert_dataset.py tg chameleon out/chameleon --geom-gcn-splits

  generic .npz with keys:
      edges (2 x m or m x 2 int array), features (n x d), labels (n,),
      train_mask/val_mask/test_mask either (n,) bool or (n, k) for k splits:
      python scripts/convert_dataset.py npz squirrel.npz out/squirrel

When the source has no splits, ten stratified 48/32/20 splits are generated
(seeded), matching the common evaluation protocol for these datasets.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def write_bundle(out_dir, name, edges, features, labels, splits):
    out = Path(out_dir)
    (out / "splits").mkdir(parents=True, exist_ok=True)
    n, d = features.shape
    num_classes = int(labels.max()) + 1

    with open(out / "graph.json", "w") as f:
        json.dump({"name": name, "n": int(n), "d": int(d), "num_classes": num_classes}, f)
        f.write("\n")

    canon = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            continue
        canon.add((min(u, v), max(u, v)))
    with open(out / "edges.tsv", "w") as f:
        for u, v in sorted(canon):
            f.write(f"{u}\t{v}\n")

    with open(out / "features.tsv", "w") as f:
        for row in features:
            f.write("\t".join(repr(float(x)) for x in row))
            f.write("\n")

    with open(out / "labels.tsv", "w") as f:
        for y in labels:
            f.write(f"{int(y)}\n")

    for k, (train, val, test) in enumerate(splits):
        with open(out / "splits" / f"split_{k}.json", "w") as f:
            json.dump({"train": [int(i) for i in train],
                       "val": [int(i) for i in val],
                       "test": [int(i) for i in test]}, f)
            f.write("\n")
    print(f"wrote {name}: n={n} d={d} classes={num_classes} "
          f"edges={len(canon)} splits={len(splits)} -> {out}")


def stratified_splits(labels, k=10, train_frac=0.48, val_frac=0.32, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        train, val, test = [], [], []
        for c in np.unique(labels):
            ids = np.flatnonzero(labels == c)
            rng.shuffle(ids)
            n_train = max(1, int(len(ids) * train_frac))
            n_val = int(len(ids) * val_frac)
            train.extend(ids[:n_train])
            val.extend(ids[n_train:n_train + n_val])
            test.extend(ids[n_train + n_val:])
        out.append((sorted(train), sorted(val), sorted(test)))
    return out


def masks_to_splits(train_mask, val_mask, test_mask):
    def cols(mask):
        mask = np.asarray(mask)
        return mask[:, None] if mask.ndim == 1 else mask

    tr, va, te = cols(train_mask), cols(val_mask), cols(test_mask)
    return [(sorted(np.flatnonzero(tr[:, k]).tolist()),
             sorted(np.flatnonzero(va[:, k]).tolist()),
             sorted(np.flatnonzero(te[:, k]).tolist()))
            for k in range(tr.shape[1])]


def convert_npz(src, out_dir, name):
    data = np.load(src, allow_pickle=False)
    edges = np.asarray(data["edges"])
    if edges.shape[0] == 2 and edges.shape[1] != 2:
        edges = edges.T
    features = np.asarray(data["features"], dtype=np.float64)
    labels = np.asarray(data["labels"], dtype=np.int64)
    if all(k in data for k in ("train_mask", "val_mask", "test_mask")):
        splits = masks_to_splits(data["train_mask"], data["val_mask"], data["test_mask"])
    else:
        splits = stratified_splits(labels)
    write_bundle(out_dir, name or Path(src).stem, edges, features, labels, splits)


TG_DATASETS = {
    "cora": ("Planetoid", "Cora"),
    "citeseer": ("Planetoid", "CiteSeer"),
    "pubmed": ("Planetoid", "PubMed"),
    "chameleon": ("WikipediaNetwork", "chameleon"),
    "squirrel": ("WikipediaNetwork", "squirrel"),
}


def convert_tg(dataset, out_dir, root, geom_gcn_splits):
    import torch_geometric.datasets as tgd

    loader_name, arg = TG_DATASETS[dataset]
    if loader_name == "Planetoid":
        ds = tgd.Planetoid(root, arg, split="geom-gcn" if geom_gcn_splits else "public")
    else:
        ds = tgd.WikipediaNetwork(root, arg, geom_gcn_preprocess=True)
    data = ds[0]

    edges = data.edge_index.numpy().T
    features = data.x.numpy().astype(np.float64)
    labels = data.y.numpy().astype(np.int64)
    if getattr(data, "train_mask", None) is not None and data.train_mask.dim() == 2:
        splits = masks_to_splits(data.train_mask.numpy(), data.val_mask.numpy(),
                                 data.test_mask.numpy())
    else:
        splits = stratified_splits(labels)
    write_bundle(out_dir, dataset, edges, features, labels, splits)


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="source", required=True)

    tg = sub.add_parser("tg", help="convert a torch_geometric dataset")
    tg.add_argument("dataset", choices=sorted(TG_DATASETS))
    tg.add_argument("out_dir")
    tg.add_argument("--root", default="/tmp/tg_raw", help="torch_geometric download root")
    tg.add_argument("--geom-gcn-splits", action="store_true",
                    help="use the ten geom-gcn splits for Planetoid datasets")

    npz = sub.add_parser("npz", help="convert a generic .npz archive")
    npz.add_argument("src")
    npz.add_argument("out_dir")
    npz.add_argument("--name", default=None)

    args = ap.parse_args()
    if args.source == "tg":
        convert_tg(args.dataset, args.out_dir, args.root, args.geom_gcn_splits)
    else:
        convert_npz(args.src, args.out_dir, args.name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
