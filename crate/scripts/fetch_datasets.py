#!/usr/bin/env python3
"""Convert public benchmark graphs into the layout `modgae` reads.

Each dataset `<name>` becomes up to three files in the output directory:

    <name>.edges          one "u v" pair per line, original ids
    <name>.labels.csv     header "node_id,community_id"
    <name>.features.csv   header-less, row r = features of node r

Sources
-------
cora, citeseer, pubmed
    Planetoid splits of Yang, Cohen and Salakhutdinov (2016):
    https://github.com/kimiyoung/planetoid/tree/master/data
    Needed files: ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}

blogs
    Political blogs of Adamic and Glance (2005), from Mark Newman's network
    data page: http://www-personal.umich.edu/~mejn/netdata/polblogs.zip
    The GML graph is made undirected and cut to its largest connected
    component (1224 nodes); the "value" attribute (0 liberal, 1 conservative)
    is the community.

Usage
-----
    scripts/fetch_datasets.py planetoid cora  --raw path/to/planetoid/data --out data
    scripts/fetch_datasets.py blogs           --raw path/to/polblogs.gml   --out data
    scripts/fetch_datasets.py planetoid cora  --download --raw cache --out data

Only `--download` touches the network. Requires numpy and scipy (planetoid)
or networkx (blogs).
"""

import argparse
import pickle
import sys
import urllib.request
from pathlib import Path

PLANETOID_URL = "https://github.com/kimiyoung/planetoid/raw/master/data/ind.{name}.{part}"
PLANETOID_PARTS = ["x", "tx", "allx", "y", "ty", "ally", "graph", "test.index"]
POLBLOGS_URL = "http://www-personal.umich.edu/~mejn/netdata/polblogs.zip"


def download(url, dest):
    dest.parent.mkdir(parents=True, exist_ok=True)
    if not dest.exists():
        print(f"fetching {url}", file=sys.stderr)
        urllib.request.urlretrieve(url, dest)
    return dest


def load_pickle(path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def planetoid(name, raw, download_missing):
    import numpy as np
    import scipy.sparse as sp

    raw = Path(raw)
    parts = {}
    for part in PLANETOID_PARTS:
        path = raw / f"ind.{name}.{part}"
        if download_missing:
            download(PLANETOID_URL.format(name=name, part=part), path)
        if part == "test.index":
            parts[part] = [int(line) for line in path.read_text().split()]
        else:
            parts[part] = load_pickle(path)

    test_idx = parts["test.index"]
    tx, ty = parts["tx"], parts["ty"]
    lo, hi = min(test_idx), max(test_idx)
    # Citeseer has test ids with no feature row. They keep all-zero features
    # and an all-zero label row, which argmax turns into class 0, as in the
    # reference preprocessing.
    tx_full = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
    ty_full = np.zeros((hi - lo + 1, ty.shape[1]))
    for k, idx in enumerate(sorted(test_idx)):
        tx_full[idx - lo] = tx[k]
        ty_full[idx - lo] = ty[k]
    order = np.array(test_idx)
    sorted_order = np.sort(order)

    features = sp.vstack((parts["allx"], tx_full)).tolil()
    labels = np.vstack((parts["ally"], ty_full))
    features[order, :] = features[sorted_order, :]
    labels[order, :] = labels[sorted_order, :]

    unlabeled = sum(1 for row in labels if row.sum() == 0)
    edges = set()
    for u, nbrs in parts["graph"].items():
        for v in nbrs:
            if u != v:
                edges.add((min(u, v), max(u, v)))
    community = {i: int(labels[i].argmax()) for i in range(labels.shape[0])}
    return sorted(edges), community, features.toarray(), unlabeled


def blogs(raw, download_missing):
    import zipfile

    import networkx as nx

    raw = Path(raw)
    if download_missing:
        archive = download(POLBLOGS_URL, raw / "polblogs.zip")
        with zipfile.ZipFile(archive) as z:
            text = z.read("polblogs.gml").decode()
    else:
        text = raw.read_text()
    # The published GML repeats some edges, which networkx only accepts in a
    # multigraph.
    if "multigraph" not in text:
        text = text.replace("graph\n[", "graph\n[\n  multigraph 1", 1).replace("graph [", "graph [\n  multigraph 1", 1)
    g = nx.parse_gml(text, label="id")
    g = nx.Graph(g.to_undirected())
    g.remove_edges_from(nx.selfloop_edges(g))
    core = max(nx.connected_components(g), key=len)
    g = g.subgraph(core)
    edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
    community = {u: int(g.nodes[u]["value"]) for u in g.nodes()}
    return edges, community, None, 0


def write(out, name, edges, community, features):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.edges", "w") as f:
        f.writelines(f"{u} {v}\n" for u, v in edges)
    with open(out / f"{name}.labels.csv", "w") as f:
        f.write("node_id,community_id\n")
        f.writelines(f"{u},{c}\n" for u, c in sorted(community.items()))
    if features is not None:
        with open(out / f"{name}.features.csv", "w") as f:
            for row in features:
                f.write(",".join(format(v, "g") for v in row) + "\n")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("kind", choices=["planetoid", "blogs"])
    p.add_argument("name", nargs="?", default="blogs", help="cora, citeseer or pubmed for planetoid")
    p.add_argument("--raw", required=True, help="raw file (blogs) or directory (planetoid)")
    p.add_argument("--out", required=True)
    p.add_argument("--download", action="store_true", help="fetch missing raw files first")
    a = p.parse_args()

    if a.kind == "planetoid":
        if a.name not in ("cora", "citeseer", "pubmed"):
            p.error("planetoid datasets are cora, citeseer and pubmed")
        edges, community, features, unlabeled = planetoid(a.name, a.raw, a.download)
        name = a.name
    else:
        edges, community, features, unlabeled = blogs(a.raw, a.download)
        name = "blogs"
    write(a.out, name, edges, community, features)
    nodes = len(community)
    print(f"{name}: {nodes} nodes, {len(edges)} edges"
          + (f", {unlabeled} without a label placed in class 0" if unlabeled else ""))


if __name__ == "__main__":
    main()
