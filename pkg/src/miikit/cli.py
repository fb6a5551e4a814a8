"""Command-line front end.

Every command writes a run manifest (parameters, seeds, input and output
SHA-256 digests, tool version) next to its outputs; ``miikit replay`` reruns
it and compares digests. Exit codes: 0 success, 1 replay mismatch,
2 configuration or precondition error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import ContractError
from .evaluation import (DEFAULT_PAIR_CAP, FAR_TARGETS, HEADLINE_INDEX, PairSets, ThresholdTable,
                         correlation_matrix, evaluate_embeddings, success_matrix,
                         threshold_at_far, threshold_table, tar)
from .faces import synth_identity_captures
from .gallery import (ArrayGallery, Gallery, GalleryIndex, gallery_size_curve,
                      gs_search_exact_batch, gs_search_indexed_batch, nested_search,
                      size_for_median, size_for_success)
from .ideal import QuadBatch, halved_negative_distribution, histogram_rows, sample_identity_pairs
from .losses import PassThroughOracle, TableOracle, loss_feature, rs_target
from .morph import morph
from .sphere import angular_distances, mii_distances, spherical_midpoint
from .world import (DEFAULT_FAMILY, EXPLICIT, HIGH_VAR, LOW_VAR, World, WorldConfig,
                    comparator_family, embed_world, generate_world, projection_family)

TRANSFER_STREAM = 21
_RS = 22

# parameters that name output locations; replay substitutes its own
_OUTPUT_PARAMS = ("out_dir", "out")


class Run:
    """Records inputs and outputs of one command for its manifest."""

    def __init__(self, command: str, args: argparse.Namespace, out_root: Path):
        self.command = command
        self.args = args
        self.out_root = out_root
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.resolved: dict[str, object] = {}

    def inp(self, path) -> Path:
        path = Path(path)
        if path.is_dir():
            for f in sorted(p for p in path.rglob("*") if p.is_file()
                            and not p.name.endswith(".manifest.json")):
                self.inputs[str(f.resolve())] = io.sha256_file(f)
        else:
            self.inputs[str(path.resolve())] = io.sha256_file(path)
        return path

    def out(self, name: str) -> Path:
        self.out_root.mkdir(parents=True, exist_ok=True)
        path = self.out_root / name
        self.outputs[name] = ""
        return path

    def table(self, stem: str, header, rows) -> Path:
        fmt = self.args.format
        path = self.out(f"{stem}.{fmt}")
        io.write_table(path, header, rows, fmt)
        return path

    def manifest(self) -> dict:
        params = {k: v for k, v in sorted(vars(self.args).items())
                  if k not in _OUTPUT_PARAMS and k != "func"}
        if getattr(self.args, "out", None):
            params["out_name"] = Path(self.args.out).name
        for name in self.outputs:
            self.outputs[name] = io.sha256_file(self.out_root / name)
        return {
            "tool": "miikit",
            "version": __version__,
            "command": self.command,
            "params": params,
            "seeds": {k: v for k, v in params.items() if k.endswith("seed")},
            "resolved": self.resolved,
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
        }

    def write_manifest(self, stem: str) -> Path:
        path = self.out_root / f"{stem}.manifest.json"
        path.write_text(json.dumps(self.manifest(), indent=1, sort_keys=True) + "\n")
        return path


# -- shared helpers -----------------------------------------------------------------

def parse_comparators(text: str) -> list[tuple]:
    """'A:0.1,B:0.15' or with explicit seeds 'A:0.1:7' -> spec tuples."""
    specs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) not in (2, 3) or not parts[0]:
            raise ContractError(f"bad comparator spec {item!r}; expected ID:NOISE[:SEED]")
        try:
            spec = (parts[0], float(parts[1])) + ((int(parts[2]),) if len(parts) == 3 else ())
        except ValueError as exc:
            raise ContractError(f"bad comparator spec {item!r}") from exc
        specs.append(spec)
    if not specs:
        raise ContractError("no comparators given")
    return specs


def _family_text(specs=DEFAULT_FAMILY) -> str:
    return ",".join(f"{c}:{n}" for c, n in specs)


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ContractError(f"bad size list {text!r}") from exc
    if not sizes or sizes != sorted(sizes) or sizes[0] < 1:
        raise ContractError("sizes must be ascending positive integers")
    return sizes


def _load_world(run: Run) -> World:
    if not run.args.world:
        raise ContractError("--world is required")
    run.inp(run.args.world)
    return World.load(run.args.world)


def _world_tables(world, comps, pairs, run: Run):
    """Per-comparator embeddings, pair distances and threshold tables."""
    out = {}
    for c in comps:
        E = embed_world(world, c)
        flat = E.reshape(-1, world.d)
        pos, neg = pairs.distances(flat)
        out[c.id] = (E, pos, neg, _thresholds_for(c.id, neg, pos, run))
    return out


def _thresholds_for(cid, neg, pos, run: Run) -> ThresholdTable:
    src = getattr(run.args, "thresholds", None)
    if not src:
        return threshold_table(neg, pos)
    for ext in ("csv", "json"):
        path = Path(src) / f"thresholds_{cid}.{ext}"
        if path.exists():
            run.inp(path)
            return ThresholdTable.from_rows(io.read_table(path))
    raise FileNotFoundError(f"no thresholds_{cid}.csv/json under {src}")


def _pct(success) -> list[float]:
    """Per-threshold success percentages from a boolean (n_attacks, n_eps) grid."""
    return [100.0 * int(k) / success.shape[0] for k in success.sum(axis=0)]


_EPS_COLS = [f"eps{i}" for i in range(len(FAR_TARGETS))]
_ATTACK_HEADER = ["attacked_comparator", "attacker_comparator", "method", "mode", "n_attacks",
                  *_EPS_COLS]


def _threshold_rows(table: ThresholdTable):
    return [(f, e, d, t) for f, e, d, t in table.rows()]


# -- commands -----------------------------------------------------------------------

def cmd_world(args) -> int:
    run = Run("world", args, Path(args.out_dir))
    cfg = WorldConfig(d=args.d, n_identities=args.n_identities,
                      images_per_identity=args.images_per_identity,
                      concentration_regime=args.regime, kappa=args.kappa, seed=args.seed)
    world = generate_world(cfg)
    world.save(args.out_dir)
    run.resolved["kappa"] = world.kappa
    for name in ("captures.miie", "means.miie", "world.json"):
        run.out(name)
    run.write_manifest("world")
    print(f"world: {cfg.n_identities} identities x {cfg.images_per_identity} captures, "
          f"d={cfg.d}, kappa={world.kappa:.6g}")
    return 0


def cmd_eval(args) -> int:
    run = Run("eval", args, Path(args.out_dir))
    world = _load_world(run)
    comps = comparator_family(parse_comparators(args.comparators), world.d, args.comparator_seed)
    _, labels = world.flat()
    pairs = PairSets.build(labels, args.pair_cap, args.seed)
    summary, pos_named, neg_named = [], [], []
    for c in comps:
        flat = embed_world(world, c).reshape(-1, world.d)
        rep = evaluate_embeddings(c.id, flat, pairs)
        run.table(f"thresholds_{c.id}", ["far_target", "epsilon_rad", "epsilon_deg", "tar"],
                  _threshold_rows(rep.table))
        fars = np.logspace(-5, 0, 26)[:-1]
        roc = []
        for f in fars:
            e = threshold_at_far(rep.neg_dists, f)
            roc.append((float(f), e, float(np.degrees(e)), tar(rep.pos_dists, e)))
        run.table(f"roc_{c.id}", ["far_target", "epsilon_rad", "epsilon_deg", "tar"], roc)
        hp = histogram_rows(rep.pos_dists, args.hist_bins)
        hn = histogram_rows(rep.neg_dists, args.hist_bins)
        run.table(f"hist_{c.id}", ["bin_left_rad", "bin_right_rad", "pos_density", "neg_density"],
                  [(a, b, p, n) for (a, b, p), (_, _, n) in zip(hp, hn)])
        summary.append((c.id, c.noise_scale, rep.auroc, len(rep.pos_dists), len(rep.neg_dists),
                        rep.table[HEADLINE_INDEX], rep.table.tars[HEADLINE_INDEX]))
        pos_named.append((c.id, rep.pos_dists))
        neg_named.append((c.id, rep.neg_dists))
    run.table("summary", ["comparator", "noise_scale", "auroc", "n_pos", "n_neg",
                          "eps2_rad", "tar_eps2"], summary)
    hdr = ["comparator_a", "comparator_b", "pearson"]
    run.table("correlation_pos", hdr, correlation_matrix(pos_named))
    run.table("correlation_neg", hdr, correlation_matrix(neg_named))
    run.write_manifest("eval")
    for row in summary:
        print(f"{row[0]}: auroc={row[2]:.6f} eps2={row[5]:.4f} rad tar@eps2={row[6]:.4f}")
    return 0


def _select(comps, ids):
    if not ids:
        return comps
    by_id = {c.id: c for c in comps}
    missing = [i for i in ids.split(",") if i not in by_id]
    if missing:
        raise ContractError(f"unknown comparator ids {missing}")
    return [by_id[i] for i in ids.split(",")]


def transfer_mii(c_att, c_tgt, mii_att, stream) -> np.ndarray:
    """Embedding of attacker-space MIIs under the attacked comparator.

    The same comparator sees the MII exactly; another comparator sees the
    attacker's pre-image as a new free image.
    """
    if c_att is c_tgt:
        return mii_att
    return c_tgt.embed_free(c_att.invert_rotation(mii_att), stream)


def cmd_attack(args) -> int:
    if args.method == "is":
        return _attack_is(args)
    run = Run("attack", args, Path(args.out_dir))
    world = _load_world(run)
    comps = comparator_family(parse_comparators(args.comparators), world.d, args.comparator_seed)
    attackers = _select(comps, args.attackers)
    _, labels = world.flat()
    pairs = PairSets.build(labels, args.pair_cap, args.seed)
    data = _world_tables(world, comps, pairs, run)
    qpairs = sample_identity_pairs(world.config.n_identities, args.n_attacks, args.seed)
    quads = {c.id: QuadBatch.from_embeddings(data[c.id][0], qpairs) for c in comps}

    gallery = None
    if args.method == "gs" or (args.method == "rs-stub" and args.oracle == "nearest-table"):
        if not args.gallery:
            raise ContractError(f"--gallery is required for method {args.method}")
        run.inp(args.gallery)
        gallery = ArrayGallery(io.read_embeddings(args.gallery))
        if gallery.d != world.d:
            raise ContractError(f"gallery d={gallery.d} != world d={world.d}")
    if args.method == "rs-stub" and not args.oracle:
        raise ContractError("--oracle is required for method rs-stub")

    rows, losses = [], []
    for ca in attackers:
        qa = quads[ca.id]
        if args.method == "ideal":
            m_att = spherical_midpoint(qa.p_ref, qa.q_ref)
        elif args.method == "gs":
            idx = nested_search(gallery.chunks(ca), qa.p_ref, qa.q_ref, [gallery.size])[0][0]
        else:
            target = rs_target(qa.p_ref, qa.q_ref)
            if args.oracle == "pass-through":
                oracle = PassThroughOracle(world.d, ca)
            else:
                keys = np.concatenate([X for _, X in gallery.chunks(ca, np.float64)])
                oracle = TableOracle(keys, gallery.latents)
            decoded = oracle.decode(target)
            own = ca.embed_free(decoded, [args.seed, _RS])
            losses.append((ca.id, args.oracle, loss_feature(own, target)))
        for ct in comps:
            qt = quads[ct.id]
            if args.method == "ideal":
                m = transfer_mii(ca, ct, m_att, [args.seed, TRANSFER_STREAM])
            elif args.method == "gs":
                m = gallery.rows(idx, ct)
            else:
                m = ct.embed_free(decoded, [args.seed, _RS])
            dist = mii_distances(qt.p_live, qt.q_live, m)
            hits = success_matrix(dist, data[ct.id][3])
            mode = "matched" if ca is ct else "transfer"
            rows.append((ct.id, ca.id, args.method, mode, len(qt), *_pct(hits)))
            if args.method == "ideal" and mode == "matched":
                _, pos, neg, table = data[ct.id]
                _ideal_histograms(run, ct.id, dist, pos, neg, table, args.hist_bins)

    run.table(f"attack_{args.method}", _ATTACK_HEADER, rows)
    if losses:
        run.table("rs_feature_loss", ["attacker_comparator", "oracle", "feature_loss"], losses)
    run.write_manifest(f"attack_{args.method}")
    _print_attack(rows)
    return 0


def _ideal_histograms(run, cid, ideal, pos, neg, table, bins):
    cols = [histogram_rows(v, bins) for v in (ideal, pos, neg, halved_negative_distribution(neg))]
    run.table(f"hist_ideal_{cid}",
              ["bin_left_rad", "bin_right_rad", "ideal_density", "pos_density", "neg_density",
               "neg_half_density"],
              [(c[0][0], c[0][1], *(x[2] for x in c)) for c in zip(*cols)])
    run.table(f"thresholds_{cid}", ["far_target", "epsilon_rad", "epsilon_deg", "tar"],
              _threshold_rows(table))


def _print_attack(rows):
    for r in rows:
        print(f"{r[2]} {r[1]}->{r[0]} ({r[3]}): " + " ".join(f"{v:6.2f}" for v in r[5:]))


def _load_face_manifest(path, run: Run):
    run.inp(path)
    meta = json.loads(Path(path).read_text())
    root = Path(path).parent
    refs, lives = [], []
    for ident in meta["identities"]:
        pair = []
        for role in ("ref", "live"):
            img_p, lms_p = root / ident[role]["image"], root / ident[role]["landmarks"]
            run.inp(img_p)
            run.inp(lms_p)
            img = io.read_png(img_p)
            h, w = img.shape[:2]
            pair.append((img, io.read_landmarks(lms_p, w, h)))
        refs.append(pair[0])
        lives.append(pair[1])
    if len(refs) < 2:
        raise ContractError("need at least two identities in the image manifest")
    return refs, lives


def _attack_is(args) -> int:
    run = Run("attack", args, Path(args.out_dir))
    if not args.images:
        raise ContractError("--images is required for method is")
    refs, lives = _load_face_manifest(args.images, run)
    n = len(refs)
    comps = projection_family(parse_comparators(args.comparators), args.d, args.comparator_seed)
    n_att = min(args.n_attacks, n * (n - 1) // 2)
    qpairs = sample_identity_pairs(n, n_att, args.seed)
    miis = np.stack([morph(refs[p][0], refs[p][1], refs[q][0], refs[q][1], args.alpha)
                     for p, q in qpairs])
    labels = np.repeat(np.arange(n), 2)
    pairs = PairSets.build(labels, args.pair_cap, args.seed)
    rows = []
    for c in comps:
        R = c.embed_images(np.stack([r[0] for r in refs]))
        L = c.embed_images(np.stack([x[0] for x in lives]))
        flat = np.stack([R, L], axis=1).reshape(-1, args.d)
        pos, neg = pairs.distances(flat)
        table = _thresholds_for(c.id, neg, pos, run)
        M = c.embed_images(miis)
        dist = mii_distances(L[qpairs[:, 0]], L[qpairs[:, 1]], M)
        hits = success_matrix(dist, table)
        rows.append((c.id, "none", "is", "image-space", n_att, *_pct(hits)))
        run.table(f"thresholds_{c.id}", ["far_target", "epsilon_rad", "epsilon_deg", "tar"],
                  _threshold_rows(table))
    run.table("attack_is", _ATTACK_HEADER, rows)
    run.write_manifest("attack_is")
    _print_attack(rows)
    return 0


def cmd_accomplice(args) -> int:
    run = Run("accomplice", args, Path(args.out_dir))
    world = _load_world(run)
    comps = comparator_family(parse_comparators(args.comparators), world.d, args.comparator_seed)
    ca, = _select(comps, args.attacker)
    ct, = _select(comps, args.attacked)
    _, labels = world.flat()
    pairs = PairSets.build(labels, args.pair_cap, args.seed)
    data = _world_tables(world, [ca] if ca is ct else [ca, ct], pairs, run)
    qpairs = sample_identity_pairs(world.config.n_identities, args.n_attacks, args.seed)
    qa = QuadBatch.from_embeddings(data[ca.id][0], qpairs)
    qt = QuadBatch.from_embeddings(data[ct.id][0], qpairs)
    ref_dist = angular_distances(qa.p_ref, qa.q_ref)
    m = transfer_mii(ca, ct, spherical_midpoint(qa.p_ref, qa.q_ref),
                     [args.seed, TRANSFER_STREAM])
    dist = mii_distances(qt.p_live, qt.q_live, m)
    eps = data[ct.id][3][HEADLINE_INDEX]
    ok = dist <= eps
    med = float(np.median(ref_dist))
    below = ref_dist <= med
    run.table("accomplice", ["p_label", "q_label", "ref_dist_rad", "mii_dist_rad", "success_eps2"],
              [(int(p), int(q), float(r), float(d), bool(s))
               for (p, q), r, d, s in zip(qpairs, ref_dist, dist, ok)])
    overall, cond = float(ok.mean()), float(ok[below].mean())
    run.table("accomplice_summary",
              ["attacker_comparator", "attacked_comparator", "n_attacks", "eps2_rad",
               "median_ref_dist_rad", "success_rate", "below_median_success_rate",
               "n_below_median"],
              [(ca.id, ct.id, len(qpairs), eps, med, overall, cond, int(below.sum()))])
    run.write_manifest("accomplice")
    print(f"{ca.id}->{ct.id}: overall {100 * overall:.2f}%  below-median {100 * cond:.2f}%")
    return 0


def cmd_quads(args) -> int:
    run = Run("quads", args, Path(args.out_dir))
    world = _load_world(run)
    c, = comparator_family(parse_comparators(args.comparator), world.d, args.comparator_seed)
    qpairs = sample_identity_pairs(world.config.n_identities, args.n_attacks, args.seed)
    quads = QuadBatch.from_embeddings(embed_world(world, c), qpairs)
    io.write_embeddings(run.out("quads.miie"), quads.stacked())
    run.write_manifest("quads")
    return 0


def cmd_gallery(args) -> int:
    from .gallery import SyntheticGallery

    run = Run("gallery", args, Path(args.out_dir))
    g = SyntheticGallery(args.d, args.size, seed=args.seed)
    if args.comparator:
        c, = comparator_family(parse_comparators(args.comparator), args.d, args.comparator_seed)
    else:
        c = None
    io.write_embeddings(run.out("gallery.miie"), g.materialize(c).embeddings)
    run.write_manifest("gallery")
    return 0


def cmd_gs_attack(args) -> int:
    out = Path(args.out)
    run = Run("gs-attack", args, out.parent)
    out.parent.mkdir(parents=True, exist_ok=True)
    run.inp(args.gallery)
    run.inp(args.quads)
    gal = Gallery(io.read_embeddings(args.gallery).astype(np.float32))
    quads = QuadBatch.from_stacked(io.read_embeddings(args.quads))
    if gal.d != quads.p_ref.shape[1]:
        raise ContractError(f"gallery d={gal.d} != quad d={quads.p_ref.shape[1]}")
    if args.index:
        idx = GalleryIndex.build(gal, seed=args.seed)
        found, ref = gs_search_indexed_batch(idx, quads.p_ref, quads.q_ref,
                                             args.n_probe or idx.k)
    else:
        found, ref = gs_search_exact_batch(gal, quads.p_ref, quads.q_ref)
    m = gal.embeddings[found].astype(np.float64)
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    live = mii_distances(quads.p_live, quads.q_live, m)
    fmt = args.format
    io.write_table(out, ["attack", "gallery_index", "ref_mii_dist_rad", "live_mii_dist_rad"],
                   [(i, int(g), float(r), float(l)) for i, (g, r, l)
                    in enumerate(zip(found, ref, live))], fmt)
    run.outputs[out.name] = ""
    run.write_manifest(out.name)
    print(f"{len(quads)} attacks, mean ref MII distance {np.mean(ref):.4f} rad")
    return 0


def cmd_gs_curve(args) -> int:
    run = Run("gs-curve", args, Path(args.out_dir))
    world = _load_world(run)
    sizes = _parse_sizes(args.sizes)
    if args.comparator:
        c, = comparator_family(parse_comparators(args.comparator), world.d, args.comparator_seed)
        flat = embed_world(world, c).reshape(-1, world.d)
    else:
        c, flat = None, world.flat()[0]
    _, labels = world.flat()
    pos, neg = PairSets.build(labels, args.pair_cap, args.seed).distances(flat)
    table = threshold_table(neg, pos)
    curve = gallery_size_curve(world, sizes, args.n_attacks, table, comparator=c, seed=args.seed)
    run.table("gs_curve", ["gallery_size", "success_rate_eps2", "mean_mii_dist_rad",
                           "median_mii_dist_rad", "ref_success_rate_eps2",
                           "ref_mean_mii_dist_rad"],
              [(p.gallery_size, p.success_rate, p.mean_mii_dist, p.median_mii_dist,
                p.ref_success_rate, p.ref_mean_mii_dist) for p in curve])
    eps = table[HEADLINE_INDEX]
    try:
        fit = (size_for_success(curve), size_for_median(curve, eps))
    except ContractError:
        # fewer than two sizes inside the fit range
        fit = (float("nan"), float("nan"))
    run.table("gs_curve_fit", ["eps2_rad", "size_at_50pct_success", "size_at_median_eq_eps2"],
              [(eps, *fit)])
    run.write_manifest("gs_curve")
    for p in curve:
        print(f"{p.gallery_size:>10d}  {100 * p.success_rate:6.2f}%  {p.median_mii_dist:.4f} rad")
    print(f"extrapolated size for 50% success: {fit[0]:.3g} (median fit {fit[1]:.3g})")
    return 0


def cmd_faces(args) -> int:
    run = Run("faces", args, Path(args.out_dir))
    entries = []
    for label in range(args.n_identities):
        caps = synth_identity_captures(label, 2, args.size, args.seed)
        ent = {"label": label}
        for role, cap in zip(("ref", "live"), caps):
            img, lms = f"face_{label:04d}_{role}.png", f"face_{label:04d}_{role}.json"
            io.write_png(run.out(img), cap.image)
            io.write_landmarks(run.out(lms), cap.landmarks)
            ent[role] = {"image": img, "landmarks": lms}
        entries.append(ent)
    run.out("faces.json").write_text(json.dumps({"identities": entries}, indent=1) + "\n")
    run.write_manifest("faces")
    return 0


def cmd_morph(args) -> int:
    out = Path(args.out)
    run = Run("morph", args, out.parent)
    out.parent.mkdir(parents=True, exist_ok=True)
    imgs = [io.read_png(run.inp(p)) for p in (args.img_p, args.img_q)]
    lms = []
    for p, img in zip((args.lms_p, args.lms_q), imgs):
        h, w = img.shape[:2]
        lms.append(io.read_landmarks(run.inp(p), w, h))
    result = morph(imgs[0], lms[0], imgs[1], lms[1], args.alpha)
    io.write_png(out, result)
    run.outputs[out.name] = ""
    run.write_manifest(out.name)
    return 0


def cmd_replay(args) -> int:
    meta = json.loads(Path(args.manifest).read_text())
    params = dict(meta["params"])
    out_dir = Path(args.out_dir)
    out_name = params.pop("out_name", None)
    for path, digest in meta["inputs"].items():
        if io.sha256_file(path) != digest:
            print(f"input changed since the recorded run: {path}", file=sys.stderr)
            return 1
    ns = argparse.Namespace(**params, out_dir=str(out_dir))
    if out_name is not None:
        ns.out = str(out_dir / out_name)
    _COMMANDS[meta["command"]](ns)
    bad = 0
    for name, digest in meta["outputs"].items():
        got = io.sha256_file(out_dir / name)
        status = "ok" if got == digest else "MISMATCH"
        bad += got != digest
        print(f"{status:8s} {name}")
    return 1 if bad else 0


_COMMANDS = {
    "world": cmd_world, "eval": cmd_eval, "attack": cmd_attack, "accomplice": cmd_accomplice,
    "quads": cmd_quads, "gallery": cmd_gallery, "gs-attack": cmd_gs_attack,
    "gs-curve": cmd_gs_curve, "faces": cmd_faces, "morph": cmd_morph,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="miikit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"miikit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, world=True, out_dir=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if out_dir:
            p.add_argument("--out-dir", default=".")
        if world:
            p.add_argument("--world", help="world directory written by `miikit world`")
            p.add_argument("--comparator-seed", type=int, default=0,
                           help="base seed for comparators built without an explicit seed")
            p.add_argument("--pair-cap", type=int, default=DEFAULT_PAIR_CAP)

    p = sub.add_parser("world", help="generate a synthetic identity world")
    common(p, world=False)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--n-identities", type=int, default=1000)
    p.add_argument("--images-per-identity", type=int, default=2)
    p.add_argument("--regime", choices=(LOW_VAR, HIGH_VAR, EXPLICIT), default=LOW_VAR)
    p.add_argument("--kappa", type=float)
    p.set_defaults(func=cmd_world)

    p = sub.add_parser("eval", help="thresholds, ROC/AUROC and cross-comparator correlations")
    common(p)
    p.add_argument("--comparators", default=_family_text())
    p.add_argument("--hist-bins", type=int, default=100)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="success-rate table for one MII method")
    common(p)
    p.add_argument("--method", choices=("ideal", "gs", "is", "rs-stub"), required=True)
    p.add_argument("--comparators", default=_family_text())
    p.add_argument("--attackers", help="comma-separated attacker ids (default: all)")
    p.add_argument("--n-attacks", type=int, default=10_000)
    p.add_argument("--thresholds", help="directory of thresholds_<id> tables from `eval`")
    p.add_argument("--hist-bins", type=int, default=100)
    p.add_argument("--gallery", help="latent gallery embeddings (gs, rs-stub nearest-table)")
    p.add_argument("--oracle", choices=("pass-through", "nearest-table"))
    p.add_argument("--images", help="face manifest JSON (is)")
    p.add_argument("--d", type=int, default=128, help="image comparator dimension (is)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("accomplice", help="success conditioned on reference similarity")
    common(p)
    p.add_argument("--comparators", default=_family_text())
    p.add_argument("--attacker", required=True)
    p.add_argument("--attacked", required=True)
    p.add_argument("--n-attacks", type=int, default=10_000)
    p.add_argument("--thresholds")
    p.set_defaults(func=cmd_accomplice)

    p = sub.add_parser("quads", help="export attack quads under one comparator")
    common(p)
    p.add_argument("--comparator", default="A:0.1")
    p.add_argument("--n-attacks", type=int, default=10_000)
    p.set_defaults(func=cmd_quads)

    p = sub.add_parser("gallery", help="write a synthetic gallery")
    common(p, world=False)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--comparator", help="embed under this comparator (default: latent)")
    p.add_argument("--comparator-seed", type=int, default=0)
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("gs-attack", help="gallery search over explicit files")
    common(p, world=False, out_dir=False)
    p.add_argument("--gallery", required=True)
    p.add_argument("--quads", required=True)
    p.add_argument("--index", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--n-probe", type=int, default=0, help="centroids to probe (0: all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gs_attack)

    p = sub.add_parser("gs-curve", help="gallery-search success versus gallery size")
    common(p)
    p.add_argument("--comparator", help="matched comparator (default: latent space)")
    p.add_argument("--sizes", default="1,10,100,1000,10000,100000,1000000")
    p.add_argument("--n-attacks", type=int, default=2000)
    p.set_defaults(func=cmd_gs_curve)

    p = sub.add_parser("faces", help="write toy face images and landmarks")
    common(p, world=False)
    p.add_argument("--n-identities", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=cmd_faces)

    p = sub.add_parser("morph", help="landmark morph of two face images")
    p.add_argument("--img-p", required=True)
    p.add_argument("--lms-p", required=True)
    p.add_argument("--img-q", required=True)
    p.add_argument("--lms-q", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_morph)

    p = sub.add_parser("replay", help="rerun a manifest and compare output digests")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
