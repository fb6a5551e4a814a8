import json

import numpy as np
import pytest

from miikit import io
from miikit.cli import _pct, main
from miikit.evaluation import PairSets, success_matrix, threshold_table
from miikit.ideal import QuadBatch, ideal_attack_distances, sample_identity_pairs
from miikit.world import EXPLICIT, LOW_VAR, World, comparator_family, embed_world


def run(*argv):
    return main([str(a) for a in argv])


def make_world(tmp_path, name="w", **kw):
    out = tmp_path / name
    flags = {"d": 16, "n-identities": 120, "regime": EXPLICIT, "kappa": 80.0, "seed": 3}
    flags.update(kw)
    argv = ["world", "--out-dir", out]
    for k, v in flags.items():
        argv += [f"--{k}", v]
    assert run(*argv) == 0
    return out


def eps_rows(path):
    return [[float(r[f"eps{i}"]) for i in range(5)] for r in io.read_table(path)]


def test_world_rejects_single_identity(tmp_path, capsys):
    assert run("world", "--out-dir", tmp_path, "--n-identities", 1) == 2
    assert ">= 2" in capsys.readouterr().err


def test_missing_world_is_io_error(tmp_path):
    assert run("eval", "--world", tmp_path / "nope", "--out-dir", tmp_path) == 3


def test_world_is_deterministic(tmp_path):
    a = make_world(tmp_path, "a")
    b = make_world(tmp_path, "b")
    for name in ("captures.miie", "means.miie", "world.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_calibrated_world_manifest_records_kappa(tmp_path):
    out = tmp_path / "w"
    assert run("world", "--out-dir", out, "--d", 16, "--n-identities", 20,
               "--regime", LOW_VAR) == 0
    man = json.loads((out / "world.manifest.json").read_text())
    kappa = man["resolved"]["kappa"]
    assert np.isfinite(kappa) and kappa > 0
    assert World.load(out).kappa == kappa


def test_eval_single_and_duplicated_comparators(tmp_path):
    w = make_world(tmp_path)
    assert run("eval", "--world", w, "--out-dir", tmp_path / "one", "--comparators", "A:0.1") == 0
    assert io.read_table(tmp_path / "one" / "correlation_pos.csv") == []
    rows = io.read_table(tmp_path / "one" / "thresholds_A.csv")
    eps = [float(r["epsilon_rad"]) for r in rows]
    assert len(eps) == 5 and eps == sorted(eps)
    assert run("eval", "--world", w, "--out-dir", tmp_path / "dup",
               "--comparators", "A:0.1,A:0.1") == 0
    for kind in ("pos", "neg"):
        (r,) = io.read_table(tmp_path / "dup" / f"correlation_{kind}.csv")
        assert float(r["pearson"]) == 1.0


def test_ideal_attack_matches_api(tmp_path):
    w = make_world(tmp_path)
    out = tmp_path / "atk"
    assert run("attack", "--method", "ideal", "--world", w, "--out-dir", out,
               "--comparators", "A:0.1", "--n-attacks", 2000, "--seed", 5) == 0
    world = World.load(w)
    (c,) = comparator_family([("A", 0.1)], world.d)
    E = embed_world(world, c)
    _, labels = world.flat()
    pos, neg = PairSets.build(labels, seed=5).distances(E.reshape(-1, world.d))
    quads = QuadBatch.from_embeddings(E, sample_identity_pairs(world.config.n_identities, 2000, 5))
    S = success_matrix(ideal_attack_distances(quads), threshold_table(neg, pos))
    assert eps_rows(out / "attack_ideal.csv") == [_pct(S)]


def test_gs_with_midpoint_gallery_matches_ideal(tmp_path):
    w = make_world(tmp_path)
    world = World.load(w)
    (c,) = comparator_family([("A", 0.0)], world.d)
    quads = QuadBatch.from_embeddings(
        embed_world(world, c), sample_identity_pairs(world.config.n_identities, 1000, 2))
    mids = quads.p_ref + quads.q_ref
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    # the gallery file holds latents; store each midpoint's preimage
    io.write_embeddings(tmp_path / "g.miie", c.invert_rotation(mids))
    common = ["--world", w, "--comparators", "A:0.0", "--n-attacks", 1000, "--seed", 2]
    assert run("attack", "--method", "ideal", "--out-dir", tmp_path / "i", *common) == 0
    assert run("attack", "--method", "gs", "--gallery", tmp_path / "g.miie",
               "--out-dir", tmp_path / "g", *common) == 0
    gs = eps_rows(tmp_path / "g" / "attack_gs.csv")
    assert gs == eps_rows(tmp_path / "i" / "attack_ideal.csv")


def test_two_seeds_agree_within_two_points(tmp_path):
    w = make_world(tmp_path, d=32, **{"n-identities": 300})
    rates = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        assert run("attack", "--method", "ideal", "--world", w, "--out-dir", out,
                   "--comparators", "A:0.1", "--n-attacks", 10_000, "--seed", seed) == 0
        rates.append(eps_rows(out / "attack_ideal.csv")[0][2])
    assert abs(rates[0] - rates[1]) < 2.0


def test_rates_monotone_in_every_table(tmp_path):
    w = make_world(tmp_path)
    io.write_embeddings(tmp_path / "g.miie",
                        np.random.default_rng(0).standard_normal((500, 16)))
    for method, extra in [("ideal", []), ("gs", ["--gallery", tmp_path / "g.miie"]),
                          ("rs-stub", ["--oracle", "pass-through"]),
                          ("rs-stub", ["--oracle", "nearest-table", "--gallery",
                                       tmp_path / "g.miie"])]:
        out = tmp_path / f"{method}{len(extra)}"
        assert run("attack", "--method", method, "--world", w, "--out-dir", out,
                   "--n-attacks", 300, *extra) == 0
        for row in eps_rows(out / f"attack_{method}.csv"):
            assert row == sorted(row)


def test_method_inputs_required(tmp_path):
    w = make_world(tmp_path)
    assert run("attack", "--method", "gs", "--world", w, "--out-dir", tmp_path) == 2
    assert run("attack", "--method", "rs-stub", "--world", w, "--out-dir", tmp_path) == 2
    assert run("attack", "--method", "is", "--out-dir", tmp_path) == 2


def test_zero_variance_world_full_success_above_half_support(tmp_path):
    w = make_world(tmp_path, kappa="inf")
    out = tmp_path / "z"
    assert run("attack", "--method", "ideal", "--world", w, "--out-dir", out,
               "--comparators", "A:0.0", "--n-attacks", 2000) == 0
    thr = [float(r["epsilon_rad"]) for r in io.read_table(out / "thresholds_A.csv")]
    hist = io.read_table(out / "hist_ideal_A.csv")
    half_max = max(float(r["bin_right_rad"]) for r in hist if float(r["neg_half_density"]) > 0)
    (row,) = eps_rows(out / "attack_ideal.csv")
    checked = 0
    for e, rate in zip(thr, row):
        if e >= half_max:
            assert rate == 100.0
            checked += 1
    assert checked > 0


def test_accomplice_zero_noise_same_comparator(tmp_path):
    w = make_world(tmp_path)
    out = tmp_path / "acc"
    assert run("accomplice", "--world", w, "--out-dir", out, "--comparators", "A:0.0",
               "--attacker", "A", "--attacked", "A", "--n-attacks", 2000) == 0
    (s,) = io.read_table(out / "accomplice_summary.csv")
    assert float(s["below_median_success_rate"]) >= float(s["success_rate"])
    assert int(s["n_below_median"]) > 0


def test_replay_reproduces_and_detects_changed_input(tmp_path, capsys):
    w = make_world(tmp_path)
    out = tmp_path / "e"
    assert run("eval", "--world", w, "--out-dir", out, "--comparators", "A:0.1,B:0.2") == 0
    assert run("replay", out / "eval.manifest.json", "--out-dir", tmp_path / "r") == 0
    assert "MISMATCH" not in capsys.readouterr().out
    (w / "world.json").write_text((w / "world.json").read_text() + " ")
    assert run("replay", out / "eval.manifest.json", "--out-dir", tmp_path / "r2") == 1


def test_faces_morph_and_is(tmp_path):
    faces = tmp_path / "faces"
    assert run("faces", "--out-dir", faces, "--n-identities", 6, "--size", 32) == 0
    assert run("morph", "--img-p", faces / "face_0000_ref.png",
               "--lms-p", faces / "face_0000_ref.json", "--img-q", faces / "face_0001_ref.png",
               "--lms-q", faces / "face_0001_ref.json", "--out", tmp_path / "m" / "mii.png") == 0
    assert io.read_png(tmp_path / "m" / "mii.png").shape == (32, 32, 3)
    out = tmp_path / "is"
    assert run("attack", "--method", "is", "--images", faces / "faces.json", "--d", 16,
               "--out-dir", out, "--comparators", "A:0.1,B:0.2", "--n-attacks", 10) == 0
    rows = eps_rows(out / "attack_is.csv")
    assert len(rows) == 2 and all(r == sorted(r) for r in rows)


def test_bad_comparator_spec(tmp_path):
    w = make_world(tmp_path)
    assert run("eval", "--world", w, "--out-dir", tmp_path, "--comparators", "A") == 2
    assert run("eval", "--world", w, "--out-dir", tmp_path, "--comparators", "A:x") == 2


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_thresholds_reused_across_commands(tmp_path, fmt):
    w = make_world(tmp_path)
    ev = tmp_path / "ev"
    assert run("eval", "--world", w, "--out-dir", ev, "--comparators", "A:0.1",
               "--format", fmt) == 0
    out = tmp_path / "atk"
    assert run("attack", "--method", "ideal", "--world", w, "--out-dir", out,
               "--comparators", "A:0.1", "--thresholds", ev, "--n-attacks", 200,
               "--format", fmt) == 0
    a = io.read_table(ev / f"thresholds_A.{fmt}")
    b = io.read_table(out / f"thresholds_A.{fmt}")
    assert [float(r["epsilon_rad"]) for r in a] == [float(r["epsilon_rad"]) for r in b]
