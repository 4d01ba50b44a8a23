import io

import pytest

from nbbfrac.bench import read_csv
from nbbfrac.cli import main
from nbbfrac.export import read_pbm


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


def test_info_level_16():
    code, text = run("info", "--fractal", "sierpinski-triangle", "--level", "16")
    assert code == 0
    kv = parse_kv(text)
    assert (kv["k"], kv["s"], kv["n"], kv["cells"]) == ("3", "2", "65536", "43046721")
    assert float(kv["hausdorff"]) == pytest.approx(1.58, abs=0.01)
    assert float(kv["compression"]) == pytest.approx(99.8, abs=0.05)


def test_map_both_directions():
    base = ("map", "--fractal", "sierpinski-triangle", "--level", "3")
    assert run(*base, "--to-compact", "5,2") == (0, "4,2\n")
    assert run(*base, "--to-embedded", "4,2") == (0, "5,2\n")
    assert run(*base, "--to-compact", "5,2", "--mma") == (0, "4,2\n")


def test_map_hole_is_an_error(capsys):
    code, _ = run("map", "--fractal", "sierpinski-triangle", "--level", "2", "--to-compact", "2,2")
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_descriptor_file(tmp_path):
    path = tmp_path / "h.txt"
    path.write_text("# H fractal\nname=h\nk=7\ns=3\nreplicas=0,0;2,0;0,1;1,1;2,1;0,2;2,2\n")
    code, text = run("info", "--fractal", f"@{path}", "--level", "2")
    assert code == 0 and parse_kv(text)["cells"] == "49"
    code, text = run("verify", "--fractal", f"@{path}", "--level", "3")
    assert code == 0 and "PASS" in text


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["info", "--fractal", "sierpinski-triangle"],
        ["info", "--fractal", "sierpinski-triangle", "--level", "2", "--bogus"],
        ["map", "--fractal", "sierpinski-triangle", "--level", "2", "--to-compact", "x"],
        ["simulate", "--fractal", "sierpinski-triangle", "--level", "2", "--rule", "life"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv, out=io.StringIO()) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_fractal_exit_2():
    assert run("info", "--fractal", "koch", "--level", "2")[0] == 2


def test_verify_maps_and_stencil():
    code, text = run(
        "verify", "--fractal", "sierpinski-triangle", "--level", "5", "--stencil", "--steps", "10"
    )
    assert code == 0
    assert text.count("PASS") == 2


def test_verify_failure_exit_1(monkeypatch):
    from nbbfrac import cli
    from nbbfrac.oracle import MapReport

    monkeypatch.setattr(cli, "verify_maps", lambda d, r: MapReport(d.name, r, 1, ["boom"]))
    code, text = run("verify", "--fractal", "vicsek", "--level", "1")
    assert code == 1 and "boom" in text


def test_simulate_with_frames(tmp_path):
    out = tmp_path / "frames"
    hashes = set()
    for backend in ("bb", "compact"):
        d = tmp_path / backend
        code, text = run(
            "simulate", "--fractal", "sierpinski-triangle", "--level", "4", "--backend", backend,
            "--rule", "B3/S23", "--steps", "6", "--seed", "3", "--density", "0.5",
            "--out", str(d), "--format", "pbm", "--every", "2",
        )
        assert code == 0
        hashes.add(parse_kv(text)["hash"])
        names = sorted(p.name for p in d.iterdir())
        assert names == ["final.pbm", "frame_000002.pbm", "frame_000004.pbm", "frame_000006.pbm"]
    assert len(hashes) == 1
    assert (tmp_path / "bb" / "final.pbm").read_bytes() == (tmp_path / "compact" / "final.pbm").read_bytes()
    assert read_pbm(tmp_path / "bb" / "final.pbm").shape == (16, 16)


def test_simulate_blocked():
    code, text = run(
        "simulate", "--fractal", "sierpinski-carpet", "--level", "3", "--backend", "compact",
        "--block-size", "3", "--steps", "3", "--workers", "2",
    )
    ref = run(
        "simulate", "--fractal", "sierpinski-carpet", "--level", "3", "--backend", "bb", "--steps", "3",
    )[1]
    assert code == 0 and parse_kv(text)["hash"] == parse_kv(ref)["hash"]


def test_bench_csv(tmp_path):
    path = tmp_path / "b.csv"
    code, _ = run(
        "bench", "--fractal", "sierpinski-triangle", "--levels", "2..3", "--backends", "bb,compact",
        "--reps", "2", "--iters", "2", "--block-sizes", "2", "--csv", str(path),
    )
    assert code == 0
    with open(path) as fh:
        recs = read_csv(fh)
    assert [(r.level, r.backend, r.block_size) for r in recs] == [
        (2, "bb", None), (2, "compact", None), (2, "compact", 2),
        (3, "bb", None), (3, "compact", None), (3, "compact", 2),
    ]


def test_bench_unknown_backend(tmp_path):
    code, _ = run(
        "bench", "--fractal", "vicsek", "--levels", "1", "--backends", "gpu", "--csv", str(tmp_path / "x.csv"),
    )
    assert code == 2
