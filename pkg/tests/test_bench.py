import importlib.util

from conftest import ROOT


def test_benchmark_backends_agree(capsys):
    spec = importlib.util.spec_from_file_location("bench_cutsets", ROOT / "benchmarks" / "bench_cutsets.py")
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    assert bench.main(["--trees", "5", "--leaves", "10", "--repeat", "1"]) == 0
    assert "python" in capsys.readouterr().out
