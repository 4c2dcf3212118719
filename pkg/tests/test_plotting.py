import numpy as np

from convfilter.extract.pipeline import SweepRow
from convfilter.metrics import ExtractionScore, pr_curve
from convfilter.plotting import plot_length_histogram, plot_pr_curves, plot_sweep, plot_training
from convfilter.train import TrainReport

PNG = b"\x89PNG\r\n\x1a\n"


def test_figures_written_and_reproducible(tmp_path, small_corpus):
    r = np.random.default_rng(0)
    curves = {"SYM": pr_curve(r.uniform(size=50), r.uniform(size=50) < 0.3)}
    rows = [SweepRow(m, t, ExtractionScore(t * 0.5, t * 0.4)) for m in ("mr", "category") for t in (0.0, 0.5, 1.0)]
    report = TrainReport([1.0, 0.7, 0.6], [0.2, 0.3, 0.25], best_epoch=2)
    jobs = [
        lambda p: plot_pr_curves(curves, p),
        lambda p: plot_sweep(rows, p, baseline=0.3),
        lambda p: plot_training(report, p),
        lambda p: plot_length_histogram(small_corpus, p),
    ]
    for k, job in enumerate(jobs):
        a, b = tmp_path / f"{k}a.png", tmp_path / f"{k}b.png"
        job(a)
        job(b)
        assert a.read_bytes().startswith(PNG)
        assert a.read_bytes() == b.read_bytes()
