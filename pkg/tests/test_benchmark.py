import importlib.util
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernel.py"


def test_benchmark_runs(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernel", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--steps", "20", "--traj", "16", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "python" in out and "trajectory-steps/s" in out
