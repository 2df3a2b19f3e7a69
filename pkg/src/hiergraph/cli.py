"""Command-line entry point: ``hiergraph <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from hiergraph.errors import ConfigError, HierGraphError

log = logging.getLogger("hiergraph")


def _config(args, **overrides):
    from hiergraph.pipeline import PipelineConfig

    given = {k: v for k, v in overrides.items() if v is not None}
    if getattr(args, "config", None):
        return PipelineConfig.load(args.config, **given)
    return PipelineConfig(**given)


def _read_graphs(path):
    from hiergraph.graph import read_corpus

    return list(read_corpus(path))


def _add_common(p, workers=True):
    p.add_argument("--config", help="flat key=value pipeline config file")
    p.add_argument("--seed", type=int)
    if workers:
        p.add_argument("--workers", type=int)


# --------------------------------------------------------------------------
# commands


def cmd_dataset(args):
    from hiergraph.datasets import SbmSpec, generate_sbm_corpus
    from hiergraph.graph import write_corpus

    spec = SbmSpec(args.count, (args.k_min, args.k_max), (args.size_min, args.size_max),
                   args.p_in, args.p_out, args.seed or 0)
    c = generate_sbm_corpus(spec)
    write_corpus(c, args.out)
    print(f"wrote {len(c)} graphs to {args.out}")


def cmd_ingest(args):
    from hiergraph import datasets
    from hiergraph.graph import write_graph

    if args.name == "cora":
        if args.npz:
            res = datasets.ingest_cora_npz(args.npz)
        elif args.content and args.cites:
            res = datasets.ingest_cora(args.content, args.cites)
        else:
            raise ConfigError("ingest cora needs --npz, or --content and --cites")
    else:
        if not (args.edges and args.target):
            raise ConfigError("ingest facebook needs --edges and --target")
        res = datasets.ingest_facebook(args.edges, args.target)
    write_graph(res.graph, args.out)
    print(res.summary())
    print(f"density={res.graph.density():.6g}")


def cmd_build_hier(args):
    from hiergraph.graph import read_corpus
    from hiergraph.hierarchy import (build_from_corpus, build_from_large_graph, label_segmenter,
                                     save_dataset)

    cfg = _config(args, seed=args.seed, workers=args.workers, resolution=args.resolution,
                  repeats=args.repeats)
    corpus = read_corpus(args.input)
    segmenter = label_segmenter if args.segmenter == "labels" else None
    resolution = cfg.resolution_for("")
    mode = args.mode
    if mode == "auto":
        mode = "large" if len(corpus) == 1 else "corpus"
    if mode == "large":
        if len(corpus) != 1:
            raise ConfigError("large mode expects a file holding one graph")
        ds = build_from_large_graph(corpus[0], resolution, cfg.repeats, cfg.seed, cfg.workers, segmenter)
    else:
        ds = build_from_corpus(corpus, resolution, cfg.seed, cfg.workers, segmenter,
                               uniform_label=args.uniform_label)
    save_dataset(ds, args.out)
    print(f"templates={len(ds.h2_samples)} communities={len(ds.h1_samples)} "
          f"pairs={len(ds.pair_samples)} -> {args.out}")


def cmd_fit(args):
    from hiergraph.hierarchy import load_dataset
    from hiergraph.pipeline import backend_from_config

    cfg = _config(args, backend=args.backend)
    ds = load_dataset(args.data)
    backend = backend_from_config(cfg, ds, dataset_path=args.data)
    backend.save(args.out)
    print(f"fitted {backend.name} backend on {len(ds.h1_samples)} communities -> {args.out}")


def cmd_sample(args):
    from hiergraph.backends import load_backend
    from hiergraph.graph import write_graph
    from hiergraph.pipeline import sample_graph

    cfg = _config(args, seed=args.seed, workers=args.workers, max_h1_size=args.max_h1_size,
                  size_hint_mode=args.size_hint_mode)
    backend = load_backend(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["index\tnodes\tedges\ttemplate_nodes\ttemplate_edges\tpeak_pair_size\tprovenance_ok\tseconds"]
    for i in range(args.count):
        g, tr = sample_graph(cfg, backend, i)
        write_graph(g, out / f"{i:04d}.txt")
        rows.append("\t".join(str(x) for x in (
            i, g.node_count, g.num_edges, tr.template.node_count, tr.template.graph.num_edges,
            tr.peak_pair_size, str(tr.provenance_ok).lower(), round(sum(tr.stage_seconds.values()), 4))))
    (out / "trace.tsv").write_text("\n".join(rows) + "\n")
    print(f"wrote {args.count} graphs to {out}")


def cmd_bter(args):
    from hiergraph.bter import fit_bter, sample_bter
    from hiergraph.graph import largest_connected_component, read_graph, write_graph

    g = read_graph(args.input)
    s = sample_bter(fit_bter(g, args.seed or 0))
    out = s.graph
    if not args.keep_components:
        out, _ = largest_connected_component(out)
    write_graph(out, args.out)
    print(f"nodes={out.node_count} edges={out.num_edges} phase1_edges={s.phase1_edges} "
          f"dropped={s.dropped}")


def cmd_eval(args):
    from hiergraph.pipeline import evaluate_sets

    cfg = _config(args, seed=args.seed, workers=args.workers)
    cfg = cfg.replace(figures=not args.no_figures)
    sets = {"real": _read_graphs(args.real)}
    for spec in args.generated:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        if name == "real" or name in sets:
            raise ConfigError(f"duplicate or reserved model name {name!r}")
        sets[name] = _read_graphs(path)
    report = evaluate_sets("eval", sets, cfg, args.out, community=args.community)
    for f in report.files:
        print(f)


def cmd_experiment(args):
    from hiergraph.pipeline import run_experiment

    cfg = _config(args, seed=args.seed, workers=args.workers, out_dir=args.out,
                  backend=args.backend, samples=args.samples, resolution=args.resolution,
                  repeats=args.repeats, cora_npz=args.cora_npz, cora_content=args.cora_content,
                  cora_cites=args.cora_cites, facebook_edges=args.facebook_edges,
                  facebook_target=args.facebook_target)
    report = run_experiment(args.name, cfg)
    for f in report.files:
        print(f)


def cmd_scaling_probe(args):
    from hiergraph.pipeline import scaling_probe

    cfg = _config(args, seed=args.seed, workers=args.workers)
    rows = [scaling_probe(n, cfg).as_row() for n in args.n_max]
    keys = list(rows[0])
    lines = ["\t".join(keys)] + ["\t".join(str(r.get(k, "")) for k in keys) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hiergraph", description="Hierarchical graph generation toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("dataset", help="generate a benchmark corpus")
    s.add_argument("kind", choices=["sbm"])
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--k-min", type=int, default=2)
    s.add_argument("--k-max", type=int, default=5)
    s.add_argument("--size-min", type=int, default=20)
    s.add_argument("--size-max", type=int, default=40)
    s.add_argument("--p-in", type=float, default=0.3)
    s.add_argument("--p-out", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("ingest", help="convert a published dataset to the graph format")
    s.add_argument("name", choices=["cora", "facebook"])
    s.add_argument("--npz", help="cora: NetGAN-style cora_ml .npz")
    s.add_argument("--content", help="cora: cora.content")
    s.add_argument("--cites", help="cora: cora.cites")
    s.add_argument("--edges", help="facebook: musae_facebook_edges.csv")
    s.add_argument("--target", help="facebook: musae_facebook_target.csv")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build-hier", help="segment graphs into a hierarchical training set")
    s.add_argument("--in", dest="input", required=True, help="graph or corpus file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--resolution", type=float)
    s.add_argument("--repeats", type=int)
    s.add_argument("--mode", choices=["auto", "large", "corpus"], default="auto")
    s.add_argument("--segmenter", choices=["louvain", "labels"], default="louvain")
    s.add_argument("--uniform-label", action="store_true", help="give every node class 0")
    _add_common(s)
    s.set_defaults(func=cmd_build_hier)

    s = sub.add_parser("fit", help="fit a backend on a hierarchical training set")
    s.add_argument("--data", required=True)
    s.add_argument("--backend", choices=["statistical", "empirical"])
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="draw graphs from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--max-h1-size", type=int)
    s.add_argument("--size-hint-mode", choices=["hint", "model"])
    s.add_argument("--out", required=True)
    _add_common(s)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("bter", help="fit and sample the BTER baseline")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--keep-components", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bter)

    s = sub.add_parser("eval", help="statistics, MMD and QQ data for real vs generated graphs")
    s.add_argument("--real", required=True)
    s.add_argument("--generated", nargs="+", required=True, metavar="[NAME=]PATH")
    s.add_argument("--community", action="store_true", help="compare Louvain communities of two large graphs")
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out", required=True)
    _add_common(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("experiment", help="run a full benchmark comparison")
    s.add_argument("name", choices=["sbm", "cora", "facebook"])
    s.add_argument("--out")
    s.add_argument("--backend", choices=["statistical", "empirical"])
    s.add_argument("--samples", type=int)
    s.add_argument("--resolution", type=float)
    s.add_argument("--repeats", type=int)
    s.add_argument("--cora-npz")
    s.add_argument("--cora-content")
    s.add_argument("--cora-cites")
    s.add_argument("--facebook-edges")
    s.add_argument("--facebook-target")
    _add_common(s)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("scaling-probe", help="output size versus community size cap")
    s.add_argument("--n-max", type=int, nargs="+", default=[50, 150])
    s.add_argument("--out")
    _add_common(s)
    s.set_defaults(func=cmd_scaling_probe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("default")
    try:
        args.func(args)
    except HierGraphError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
